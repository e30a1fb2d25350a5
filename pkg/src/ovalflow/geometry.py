"""Strictly convex ovals represented by their support function.

A curve is stored as a truncated harmonic series of the support function
h(theta) in the tangent-angle parametrization,

    h(theta) = a_0 + sum_n [ a_n cos(n theta) + b_n sin(n theta) ],

where theta is the angle the unit tangent T(theta) = (cos theta, sin theta)
makes with the x-axis and N(theta) = (-sin theta, cos theta) is the inward
normal.  With this convention

    X(theta)  = h'(theta) T(theta) - h(theta) N(theta),
    R(theta)  = h(theta) + h''(theta)        (radius of curvature, = 1/k),
    E(theta)  = X(theta) + R(theta) N(theta) (evolute).

All derivatives are exact termwise operations on the coefficients, so
R = h + h'' holds without grid noise and closure of the curve is structural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# grazing chords are excluded everywhere in the billiard layer
PHI_GUARD = 1e-6


class CurveError(ValueError):
    """Raised when a construction or evolution violates curve invariants."""


def _grid_size_for(harmonic_count: int, grid_size: int | None = None) -> int:
    n = 16
    while n < 4 * harmonic_count:
        n *= 2
    if grid_size is not None:
        if grid_size < 4 * harmonic_count or grid_size & (grid_size - 1):
            raise CurveError(
                f"grid_size {grid_size} must be a power of two >= 4*harmonic_count"
            )
        return grid_size
    return n


@dataclass(frozen=True)
class PlanePoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise CurveError("non-finite plane point")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class SupportCurve:
    """Oval given by spectral coefficients of its support function.

    cos_coeffs[n] and sin_coeffs[n] are the amplitudes of cos(n theta) and
    sin(n theta); sin_coeffs[0] is unused and kept at zero.  grid_size is the
    number of equispaced evaluation nodes (power of two, >= 4*harmonic_count).
    """

    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray
    grid_size: int

    def __post_init__(self):
        a = np.asarray(self.cos_coeffs, float)
        b = np.asarray(self.sin_coeffs, float)
        if a.shape != b.shape or a.ndim != 1 or a.size < 1:
            raise CurveError("coefficient arrays must be 1-d and equally sized")
        object.__setattr__(self, "cos_coeffs", a)
        object.__setattr__(self, "sin_coeffs", b)
        if b[0] != 0.0:
            raise CurveError("sin_coeffs[0] must be zero")
        if self.grid_size < 4 * self.harmonic_count or self.grid_size & (self.grid_size - 1):
            raise CurveError("grid_size must be a power of two >= 4*harmonic_count")
        h, _, _, R = self.eval(self.grid())
        if np.min(h) <= 0.0:
            raise CurveError("support function not positive: origin outside the curve")
        if np.min(R) <= 0.0:
            raise CurveError(f"convexity violated: min R = {np.min(R):.3e}")

    @property
    def harmonic_count(self) -> int:
        return max(self.cos_coeffs.size - 1, 1)

    def grid(self) -> np.ndarray:
        return TWO_PI * np.arange(self.grid_size) / self.grid_size

    # -- pointwise evaluation -------------------------------------------------

    def eval(self, theta):
        """Return (h, h', h'', R) at theta (scalar or array), termwise exact."""
        th = np.asarray(theta, float)
        n = np.arange(self.cos_coeffs.size)
        arg = np.multiply.outer(th, n)
        c, s = np.cos(arg), np.sin(arg)
        a, b = self.cos_coeffs, self.sin_coeffs
        h = c @ a + s @ b
        hp = c @ (n * b) - s @ (n * a)
        hpp = -(c @ (n * n * a) + s @ (n * n * b))
        return h, hp, hpp, h + hpp

    def position(self, theta):
        """Boundary point X(theta); returns array of shape theta.shape + (2,)."""
        th = np.asarray(theta, float)
        h, hp, _, _ = self.eval(th)
        x = hp * np.cos(th) + h * np.sin(th)
        y = hp * np.sin(th) - h * np.cos(th)
        return np.stack([x, y], axis=-1)

    def tangent(self, theta):
        th = np.asarray(theta, float)
        return np.stack([np.cos(th), np.sin(th)], axis=-1)

    def normal(self, theta):
        """Inward unit normal."""
        th = np.asarray(theta, float)
        return np.stack([-np.sin(th), np.cos(th)], axis=-1)

    def evolute(self, theta):
        """Center of curvature h' T + (R - h) N."""
        th = np.asarray(theta, float)
        h, hp, _, R = self.eval(th)
        x = hp * np.cos(th) - (R - h) * np.sin(th)
        y = hp * np.sin(th) + (R - h) * np.cos(th)
        return np.stack([x, y], axis=-1)

    def width(self, theta):
        th = np.asarray(theta, float)
        h0, _, _, _ = self.eval(th)
        h1, _, _, _ = self.eval(th + math.pi)
        return h0 + h1

    # -- integral quantities --------------------------------------------------

    def area(self) -> float:
        """Enclosed area, (1/2) integral of (h^2 - h'^2), exact by Parseval."""
        a, b = self.cos_coeffs, self.sin_coeffs
        n = np.arange(a.size)
        return math.pi * (a[0] ** 2 + 0.5 * np.sum((1.0 - n[1:] ** 2) * (a[1:] ** 2 + b[1:] ** 2)))

    def perimeter(self) -> float:
        return TWO_PI * self.cos_coeffs[0]

    def entropy(self) -> float:
        """Average of log curvature, -(1/2pi) integral of log R."""
        _, _, _, R = self.eval(self.grid())
        return -float(np.mean(np.log(R)))

    def log_support_integral(self) -> float:
        """w = integral of log h over the circle (trapezoid on the grid)."""
        h, _, _, _ = self.eval(self.grid())
        return float(np.mean(np.log(h))) * TWO_PI

    def arclength(self, theta):
        """s(theta) = integral of R from 0, exact termwise."""
        th = np.asarray(theta, float)
        a, b = self.cos_coeffs, self.sin_coeffs
        n = np.arange(a.size)
        s = a[0] * th
        if a.size > 1:
            m = n[1:]
            w = (1.0 - m**2) / m
            arg = np.multiply.outer(th, m)
            s = s + np.sin(arg) @ (w * a[1:]) + (1.0 - np.cos(arg)) @ (w * b[1:])
        return s

    def theta_from_arclength(self, s: float) -> float:
        """Invert s(theta) by Newton (s' = R > 0)."""
        th = s / self.cos_coeffs[0]
        for _ in range(60):
            f = self.arclength(th) - s
            _, _, _, R = self.eval(th)
            step = f / R
            th -= step
            if abs(step) < 1e-14 * (1.0 + abs(th)):
                return float(th)
        return float(th)

    def interior_margin(self, point) -> float:
        """Signed distance of a point to the curve via the support test.

        Positive means strictly interior; equals min over the grid of
        h(psi) - <P, -N(psi)> which for convex regions is the distance to
        the nearest tangent line.
        """
        p = np.asarray(point, float)
        th = self.grid()
        h, _, _, _ = self.eval(th)
        # outward normal is -N = (sin, -cos)
        proj = p[..., 0] * np.sin(th) - p[..., 1] * np.cos(th)
        return float(np.min(h - proj))


# -- constructors ---------------------------------------------------------


def make_circle(radius: float, harmonic_count: int = 4, grid_size: int | None = None) -> SupportCurve:
    """Circle of the given radius centered at the origin."""
    if not radius > 0:
        raise CurveError("radius must be positive")
    m = harmonic_count
    a = np.zeros(m + 1)
    a[0] = radius
    return SupportCurve(a, np.zeros(m + 1), _grid_size_for(m, grid_size))


def _ellipse_support(a: float, b: float, theta):
    return np.sqrt(a * a * np.sin(theta) ** 2 + b * b * np.cos(theta) ** 2)


def make_ellipse(a: float, b: float, harmonic_count: int | None = None,
                 grid_size: int | None = None) -> SupportCurve:
    """Ellipse with semi-axes a >= b > 0 centered at the origin.

    The support function is sampled exactly in normal-angle form
    sqrt(a^2 cos^2 psi + b^2 sin^2 psi) and converted to the tangent-angle
    convention via psi = theta - pi/2 (inward normal), which gives
    h(theta) = sqrt(a^2 sin^2 theta + b^2 cos^2 theta).  harmonic_count
    defaults to the smallest count whose trailing coefficient is below
    1e-13 relative (capped at 160); only even cosine harmonics appear.
    """
    if not (a >= b > 0):
        raise CurveError("ellipse requires a >= b > 0")
    if a == b:
        return make_circle(a, harmonic_count or 4, grid_size)
    n_fine = 4096
    th = TWO_PI * np.arange(n_fine) / n_fine
    spec = np.fft.rfft(_ellipse_support(a, b, th)) / n_fine
    if harmonic_count is None:
        mags = np.abs(spec)
        rel = mags / mags[0]
        m = 8
        while m < 160 and rel[m - 1 : m + 1].max() > 1e-13:
            m += 2
        harmonic_count = m
    m = harmonic_count
    acos = 2.0 * spec[: m + 1].real
    acos[0] *= 0.5
    asin = -2.0 * spec[: m + 1].imag
    # h is even and pi-periodic: drop the symmetry-breaking residue
    asin[:] = np.where(np.abs(asin) < 1e-15, 0.0, asin)
    curve = SupportCurve(acos, asin, _grid_size_for(m, grid_size))
    return curve


def make_constant_width(d: float, odd_harmonics=(), harmonic_count: int | None = None,
                        grid_size: int | None = None) -> SupportCurve:
    """Curve of constant width d: h = d/2 plus odd harmonics of frequency >= 3.

    odd_harmonics is a list of (frequency, cos_amp, sin_amp); an even or
    unit frequency would break the constant width and is rejected, as is a
    combination violating convexity.
    """
    if not d > 0:
        raise CurveError("width must be positive")
    top = 1
    for (n, _, _) in odd_harmonics:
        if n % 2 == 0 or n < 3:
            raise CurveError(f"harmonic {n} not an odd frequency >= 3")
        top = max(top, int(n))
    m = harmonic_count or max(top, 3)
    a = np.zeros(m + 1)
    b = np.zeros(m + 1)
    a[0] = d / 2.0
    for (n, ca, sa) in odd_harmonics:
        a[int(n)] += ca
        b[int(n)] += sa
    return SupportCurve(a, b, _grid_size_for(m, grid_size))


# -- chord quantities ------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def chord_length_integral(curve: SupportCurve, theta0: float, theta1: float, phi: float) -> float:
    """Quadrature of cos(theta - theta0 - phi) R(theta) over [theta0, theta1].

    Equals the chord length from X(theta0) to X(theta1) when theta1 is the
    far intersection of the ray at angle phi from the tangent; validated
    against the Euclidean distance by the caller's tests.
    """
    if theta1 <= theta0:
        theta1 += TWO_PI
    n_panels = max(1, int(math.ceil((theta1 - theta0) / (math.pi / 2))))
    edges = np.linspace(theta0, theta1, n_panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        t = mid + half * _GL_NODES
        _, _, _, R = curve.eval(t)
        total += half * np.sum(_GL_WEIGHTS * np.cos(t - theta0 - phi) * R)
    return float(total)


def chord_lower_bound(curve: SupportCurve) -> float:
    """Diagnostic lower bound C0-realized exp(C0/2 - entropy/pi).

    The constant comes from the Jensen-inequality estimate with the
    cosine integral (2/pi) * int_0^pi log|cos u| du = -2 log 2 doubled;
    it is a reported diagnostic for non-grazing chords, not a guarantee
    near tangency.
    """
    c0 = 2.0 * (2.0 / math.pi) * (-math.pi * math.log(2.0))
    return math.exp(0.5 * c0 - curve.entropy() / math.pi)


# -- serialization ----------------------------------------------------------


def curve_to_dict(curve: SupportCurve) -> dict:
    harm = []
    for n in range(curve.cos_coeffs.size):
        an, bn = float(curve.cos_coeffs[n]), float(curve.sin_coeffs[n])
        if n == 0 or an != 0.0 or bn != 0.0:
            harm.append([n, an, bn])
    return {"harmonics": harm, "grid_size": curve.grid_size}


def curve_from_dict(data: dict) -> SupportCurve:
    try:
        harm = data["harmonics"]
        grid = int(data["grid_size"])
    except (KeyError, TypeError) as exc:
        raise CurveError(f"bad curve data: {exc}") from exc
    top = max(int(n) for (n, _, _) in harm)
    a = np.zeros(top + 1)
    b = np.zeros(top + 1)
    for (n, an, bn) in harm:
        a[int(n)] = float(an)
        b[int(n)] = float(bn)
    return SupportCurve(a, b, grid)


def trace_rows(curve: SupportCurve, samples: int = 256):
    """Rows (theta, x, y, h, R) for CSV export."""
    th = TWO_PI * np.arange(samples) / samples
    h, _, _, R = curve.eval(th)
    xy = curve.position(th)
    return [(float(t), float(p[0]), float(p[1]), float(hh), float(rr))
            for t, p, hh, rr in zip(th, xy, h, R)]
