"""Billiard map on an oval, its Jacobian, and the generating-function layer.

Phase coordinates are (theta, phi): theta the tangent angle of the bounce
point, phi in (0, pi) the angle the outgoing ray makes with the tangent.
The outgoing direction is v = cos(phi) T(theta) + sin(phi) N(theta), whose
polar angle is theta + phi; at the far intersection theta1 the same chord
direction equals cos(phi1) T(theta1) - sin(phi1) N(theta1), so

    theta1 = theta + phi + phi1

holds identically and the map conserves the cross-ratio structure of the
chord.  The reversing involution is tau(theta, phi) = (theta, pi - phi)
with B^{-1} = tau o B o tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .geometry import PHI_GUARD, TWO_PI, SupportCurve

_MAX_NEWTON = 80


class ReflectionError(RuntimeError):
    """Internal failure of the chord or midpoint solver."""


@dataclass(frozen=True)
class PhasePoint:
    theta: float
    phi: float

    def __post_init__(self):
        if not (PHI_GUARD < self.phi < math.pi - PHI_GUARD):
            raise ValueError(f"phi={self.phi} outside the grazing guard ({PHI_GUARD}, pi - {PHI_GUARD})")


@dataclass(frozen=True)
class BounceRecord:
    """One application of the billiard map with the chord data the paper's
    Jacobian formula needs: chord length l and x = R sin(phi) at both ends."""
    start: PhasePoint
    end: PhasePoint
    chord: float
    x_in: float
    x_out: float


def involution(p: PhasePoint) -> PhasePoint:
    return PhasePoint(p.theta, math.pi - p.phi)


def _chord_angle(curve: SupportCurve, theta0: float, x0: np.ndarray, theta1):
    """Angle in (0, pi) of X(theta1) - X(theta0) measured from T(theta0).

    Monotone increasing in theta1 on (theta0, theta0 + 2 pi) for a convex
    curve, which makes the chord solve a bracketed scalar root find.
    """
    d = curve.position(theta1) - x0
    tx, ty = math.cos(theta0), math.sin(theta0)
    dot = d[..., 0] * tx + d[..., 1] * ty
    cross = tx * d[..., 1] - ty * d[..., 0]
    return np.arctan2(cross, dot)


def far_intersection(curve: SupportCurve, theta: float, phi: float) -> float:
    """Solve for theta1 in (theta, theta + 2 pi) where the ray at angle phi
    from the tangent meets the curve again."""
    x0 = curve.position(theta)
    lo = theta + 1e-7
    hi = theta + TWO_PI - 1e-7
    f = lambda t: _chord_angle(curve, theta, x0, t) - phi
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        # can only happen within the endpoint guards for extreme grazing
        raise ReflectionError(f"chord bracket failed at theta={theta}, phi={phi}")
    return brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)


def reflect(curve: SupportCurve, p: PhasePoint) -> BounceRecord:
    """One bounce: far intersection of the ray, then elastic reflection."""
    theta1 = far_intersection(curve, p.theta, p.phi)
    x0 = curve.position(p.theta)
    x1 = curve.position(theta1)
    d = x1 - x0
    chord = float(np.hypot(d[0], d[1]))
    v = d / chord
    t1 = np.array([math.cos(theta1), math.sin(theta1)])
    n1 = np.array([-math.sin(theta1), math.cos(theta1)])
    phi1 = math.atan2(-float(v @ n1), float(v @ t1))
    _, _, _, R0 = curve.eval(p.theta)
    _, _, _, R1 = curve.eval(theta1)
    end = PhasePoint(theta1 % TWO_PI, phi1)
    return BounceRecord(p, end, chord, float(R0) * math.sin(p.phi),
                        float(R1) * math.sin(phi1))


def reflect_many(curve: SupportCurve, thetas, phis, iters: int = 62):
    """Vectorized bounce for arrays of phase points via bisection.

    Uses the monotonicity of the chord angle; 62 bisections bring the
    bracket below 1e-17 rad.  Returns (theta1, phi1, chord, x_in, x_out).
    """
    th = np.asarray(thetas, float)
    ph = np.asarray(phis, float)
    x0 = curve.position(th)
    lo = th + 1e-7
    hi = th + TWO_PI - 1e-7
    tx, ty = np.cos(th), np.sin(th)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        d = curve.position(mid) - x0
        ang = np.arctan2(tx * d[..., 1] - ty * d[..., 0],
                         d[..., 0] * tx + d[..., 1] * ty)
        take_hi = ang < ph
        lo = np.where(take_hi, mid, lo)
        hi = np.where(take_hi, hi, mid)
    th1 = 0.5 * (lo + hi)
    x1 = curve.position(th1)
    d = x1 - x0
    chord = np.hypot(d[..., 0], d[..., 1])
    v = d / chord[..., None]
    c1, s1 = np.cos(th1), np.sin(th1)
    phi1 = np.arctan2(-(-s1 * v[..., 0] + c1 * v[..., 1]),
                      c1 * v[..., 0] + s1 * v[..., 1])
    _, _, _, R0 = curve.eval(th)
    _, _, _, R1 = curve.eval(th1)
    return th1 % TWO_PI, phi1, chord, R0 * np.sin(ph), R1 * np.sin(phi1)


def jacobian(curve: SupportCurve, rec: BounceRecord) -> np.ndarray:
    """Derivative of B in (theta, phi) coordinates at the bounce.

    This is the paper's matrix; its determinant is x_in/x_out, which is 1
    in the Birkhoff coordinates (s, -cos phi) (see birkhoff_jacobian).
    """
    l, x0, x1 = rec.chord, rec.x_in, rec.x_out
    return np.array([[l - x0, l], [l - x0 - x1, l - x1]]) / x1


def birkhoff_jacobian(curve: SupportCurve, rec: BounceRecord) -> np.ndarray:
    """Derivative of B in (s, -cos phi) coordinates; exactly unimodular."""
    J = jacobian(curve, rec)
    _, _, _, R0 = curve.eval(rec.start.theta)
    _, _, _, R1 = curve.eval(rec.end.theta)
    s_in = np.array([[float(R0), 0.0], [0.0, math.sin(rec.start.phi)]])
    s_out = np.array([[float(R1), 0.0], [0.0, math.sin(rec.end.phi)]])
    return s_out @ J @ np.linalg.inv(s_in)


# -- generating function -----------------------------------------------------


def _chord_between(curve: SupportCurve, ta: float, tb: float):
    """(length, departure angle at ta, arrival angle at tb) of the chord."""
    xa = curve.position(ta)
    xb = curve.position(tb)
    d = xb - xa
    length = float(np.hypot(d[0], d[1]))
    if length == 0.0:
        raise ReflectionError("coincident chord endpoints")
    v = d / length
    phi_dep = math.atan2(-math.sin(ta) * v[0] + math.cos(ta) * v[1],
                         math.cos(ta) * v[0] + math.sin(ta) * v[1])
    phi_arr = math.atan2(math.sin(tb) * v[0] - math.cos(tb) * v[1],
                         math.cos(tb) * v[0] + math.sin(tb) * v[1])
    return length, phi_dep, phi_arr


def generating_length(curve: SupportCurve, s: float, s1: float):
    """L(s, s') = |X(s') - X(s)| with its arclength partials.

    Follows the paper's sign convention -dL/ds = cos(phi) (departure angle)
    and dL/ds' = cos(phi1) (arrival angle).
    """
    ta = curve.theta_from_arclength(s)
    tb = curve.theta_from_arclength(s1)
    length, phi_dep, phi_arr = _chord_between(curve, ta, tb)
    return length, -math.cos(phi_dep), math.cos(phi_arr)


def twist_positivity(curve: SupportCurve, s: float, s1: float, s2: float) -> float:
    """Conjunction nondegeneracy at the middle point of a reflection triple.

    Returns W = -d^2/ds1^2 [L(s, s1) + L(s1, s2)]
             = k(s1) (sin(phi_arr) + sin(phi_dep)) - sin^2(phi_arr)/L1
               - sin^2(phi_dep)/L2,
    positive at the orbits treated here (the nondegenerate-maximum branch
    of the composed generating function).
    """
    ta = curve.theta_from_arclength(s)
    tb = curve.theta_from_arclength(s1)
    tc = curve.theta_from_arclength(s2)
    l1, _, phi_arr = _chord_between(curve, ta, tb)
    l2, phi_dep, _ = _chord_between(curve, tb, tc)
    _, _, _, R = curve.eval(tb)
    kb = 1.0 / float(R)
    return kb * (math.sin(phi_arr) + math.sin(phi_dep)) \
        - math.sin(phi_arr) ** 2 / l1 - math.sin(phi_dep) ** 2 / l2


def _reflection_mismatch(curve: SupportCurve, ta: float, tb: float, tc: float) -> float:
    """cos(arrival at tb from ta) - cos(departure from tb to tc); zero at a
    reflection triple.  Proportional to d/ds1 [L(s,s1) + L(s1,s2)]."""
    _, _, phi_arr = _chord_between(curve, ta, tb)
    _, phi_dep, _ = _chord_between(curve, tb, tc)
    return math.cos(phi_arr) - math.cos(phi_dep)


def midpoint_solve(curve: SupportCurve, theta_a: float, theta_c: float,
                   near: float | None = None) -> float:
    """Middle point theta_b of a reflection triple (theta_a, theta_b, theta_c).

    Solves d/d theta_b [L(a,b) + L(b,c)] = 0 inside the cyclic arc
    (theta_a, theta_c).  When several critical points exist in the arc the
    one closest to `near` is returned if given, otherwise the one with the
    largest composed length (the maximizing branch of the conjunction).
    """
    ta = theta_a
    tc = theta_c
    while tc <= ta + 1e-12:
        tc += TWO_PI
    lo, hi = ta + 1e-7, tc - 1e-7
    if near is not None:
        # the hint is believed to be near a root: expand a bracket around it
        # gently so the first sign change isolates the nearest root
        target = near
        while target <= ta:
            target += TWO_PI
        if lo < target < hi:
            f_at = _reflection_mismatch(curve, ta, target, tc)
            if f_at == 0.0:
                return float(target % TWO_PI)
            width = 1e-5
            while width < (hi - lo):
                llo = max(lo, target - width)
                lhi = min(hi, target + width)
                flo = _reflection_mismatch(curve, ta, llo, tc)
                fhi = _reflection_mismatch(curve, ta, lhi, tc)
                if flo * fhi < 0:
                    root = brentq(lambda t: _reflection_mismatch(curve, ta, t, tc),
                                  llo, lhi, xtol=1e-14, rtol=8.9e-16)
                    return float(root % TWO_PI)
                width *= 4.0
    grid = np.linspace(lo, hi, 512)
    vals = np.array([_reflection_mismatch(curve, ta, g, tc) for g in grid])
    roots = []
    for i in range(grid.size - 1):
        if vals[i] == 0.0:
            roots.append(grid[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(lambda t: _reflection_mismatch(curve, ta, t, tc),
                                grid[i], grid[i + 1], xtol=1e-14, rtol=8.9e-16))
    if not roots:
        raise ReflectionError("no reflection midpoint in the arc")
    if len(roots) == 1:
        return float(roots[0] % TWO_PI)
    if near is not None:
        target = near
        while target <= ta:
            target += TWO_PI
        best = min(roots, key=lambda r: abs(r - target))
        return float(best % TWO_PI)
    lengths = [_chord_between(curve, ta, r)[0] + _chord_between(curve, r, tc)[0]
               for r in roots]
    return float(roots[int(np.argmax(lengths))] % TWO_PI)


def composed_generating(curve: SupportCurve, theta_a: float, theta_c: float,
                        near: float | None = None) -> float:
    """Generating function of B^2: L(a, b*) + L(b*, c) at the solved midpoint."""
    tb = midpoint_solve(curve, theta_a, theta_c, near=near)
    return _chord_between(curve, theta_a, tb)[0] + _chord_between(curve, tb, theta_c)[0]
