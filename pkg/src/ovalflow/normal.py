"""Normal wavefront iteration, NP(2n) detection, and focusing envelopes.

The orthogonal wavefront Gamma = {phi = pi/2} is the fixed set of the
reversing involution tau.  Iterating the billiard map from (theta, pi/2)
gives (A_m(theta), phi_m(theta)); the derivative pair (A'_m, phi'_m) obeys
the bounce-Jacobian recursion with initial vector (1, 0).  A root of
phi_n - pi/2 closes into a 2n-periodic orbit by reversibility, and zeros
of A'_m are the focusing obstructions: the m-step envelope

    E_m(theta) = X(A_m) + [x_m A'_m / (A'_m + phi'_m)] v_{phi_m}

touches the boundary exactly where A'_{m+1} vanishes.  E_0 is the evolute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SupportCurve, TWO_PI
from .billiard import PhasePoint, reflect, reflect_many, far_intersection

HALF_PI = math.pi / 2

_SINGULAR_REL = 1e-10


@dataclass(frozen=True)
class WavefrontState:
    """m-step normal wavefront data: endpoint, derivatives, chord history."""
    m: int
    A_m: float
    phi_m: float
    dA_m: float
    dphi_m: float
    chords: tuple           # l_0 .. l_{m-1}
    x_values: tuple         # x_0 .. x_m, x_j = R(A_j) sin(phi_j)
    A_history: tuple        # A_0 .. A_m
    phi_history: tuple      # phi_0 .. phi_m
    dA_history: tuple
    dphi_history: tuple


@dataclass(frozen=True)
class NormalOrbit:
    theta0: float
    theta1: float
    n: int
    residual: float
    reducible: bool


@dataclass(frozen=True)
class NPDetectResult:
    n: int
    continuum: bool
    orbits: tuple

    @property
    def irreducible(self):
        return tuple(o for o in self.orbits if not o.reducible)


@dataclass(frozen=True)
class EnvelopePoint:
    point: np.ndarray | None
    m: int
    inside_margin: float
    singular: bool


def wavefront(curve: SupportCurve, theta: float, m: int) -> WavefrontState:
    """Iterate m bounces from (theta, pi/2), propagating (A', phi')."""
    if m < 0:
        raise ValueError("m must be >= 0")
    p = PhasePoint(theta % TWO_PI, HALF_PI)
    _, _, _, R0 = curve.eval(p.theta)
    As = [p.theta]
    phis = [HALF_PI]
    dAs = [1.0]
    dphis = [0.0]
    chords = []
    xs = [float(R0)]
    for _ in range(m):
        rec = reflect(curve, p)
        l, x0, x1 = rec.chord, rec.x_in, rec.x_out
        dA, dphi = dAs[-1], dphis[-1]
        dAs.append(((l - x0) * dA + l * dphi) / x1)
        dphis.append(((l - x0 - x1) * dA + (l - x1) * dphi) / x1)
        chords.append(l)
        xs.append(x1)
        p = rec.end
        As.append(p.theta)
        phis.append(p.phi)
    return WavefrontState(m, As[-1], phis[-1], dAs[-1], dphis[-1],
                          tuple(chords), tuple(xs), tuple(As), tuple(phis),
                          tuple(dAs), tuple(dphis))


def wavefront_arrays(curve: SupportCurve, thetas, m: int):
    """Vectorized wavefront over an array of starting angles.

    Returns dict with A, phi, dA, dphi of shape (m+1, len(thetas)) and
    chords, xs similarly stacked.
    """
    th = np.asarray(thetas, float)
    _, _, _, R0 = curve.eval(th)
    A = [th % TWO_PI]
    phi = [np.full_like(th, HALF_PI)]
    dA = [np.ones_like(th)]
    dphi = [np.zeros_like(th)]
    xs = [R0]
    chords = []
    th_cur, phi_cur = A[0], phi[0]
    for _ in range(m):
        th1, phi1, l, x0, x1 = reflect_many(curve, th_cur, phi_cur)
        da_prev, dphi_prev = dA[-1], dphi[-1]
        dA.append(((l - x0) * da_prev + l * dphi_prev) / x1)
        dphi.append(((l - x0 - x1) * da_prev + (l - x1) * dphi_prev) / x1)
        chords.append(l)
        xs.append(x1)
        th_cur, phi_cur = th1, phi1
        A.append(th1)
        phi.append(phi1)
    return {"A": np.array(A), "phi": np.array(phi), "dA": np.array(dA),
            "dphi": np.array(dphi), "chords": np.array(chords), "x": np.array(xs)}


def a1_derivative(curve: SupportCurve, theta: float) -> float:
    """Closed form A_1'(theta) = -(l - R(theta)) / (R(A_1) <T(A_1), T(theta)>)."""
    th = float(theta)
    a1 = far_intersection(curve, th, HALF_PI)
    x0 = curve.position(th)
    x1 = curve.position(a1)
    l = float(np.hypot(*(x1 - x0)))
    _, _, _, R_th = curve.eval(th)
    _, _, _, R_a1 = curve.eval(a1)
    dot = math.cos(a1 - th)
    if abs(dot) < 1e-12:
        raise RuntimeError("tangents orthogonal along a normal chord; inconsistent data")
    return -(l - float(R_th)) / (float(R_a1) * dot)


def beta(curve: SupportCurve, theta: float, m: int):
    """phi'_m / A'_m via the chord recursion derived from the bounce Jacobian:

        beta_{j+1} = [(l_j - x_j - x_{j+1}) + (l_j - x_{j+1}) beta_j]
                     / [(l_j - x_j) + l_j beta_j]

    Returns (value, at_pole); at_pole marks a vanishing denominator, which
    is a wavefront critical point (A'_{j+1} = 0).
    """
    wf = wavefront(curve, theta, m)
    b = 0.0
    for j in range(m):
        l, xj, xj1 = wf.chords[j], wf.x_values[j], wf.x_values[j + 1]
        den = (l - xj) + l * b
        if abs(den) < 1e-14 * (1.0 + abs(l)):
            return math.nan, True
        b = ((l - xj - xj1) + (l - xj1) * b) / den
    return b, False


def envelope(curve: SupportCurve, theta: float, m: int) -> EnvelopePoint:
    """Focusing point of the m-times reflected orthogonal wavefront.

    m = 0 gives the evolute point.  A vanishing A'_m + phi'_m is flagged
    singular instead of interpolated through.
    """
    wf = wavefront(curve, theta, m)
    denom = wf.dA_m + wf.dphi_m
    if abs(denom) < _SINGULAR_REL * (1.0 + abs(wf.dA_m)):
        return EnvelopePoint(None, m, math.nan, True)
    lam = wf.x_values[-1] * wf.dA_m / denom
    psi = wf.A_m + wf.phi_m  # polar angle of the outgoing ray
    point = curve.position(wf.A_m) + lam * np.array([math.cos(psi), math.sin(psi)])
    return EnvelopePoint(point, m, curve.interior_margin(point), False)


def evolute_containment(curve: SupportCurve, scan_points: int = 1024):
    """(contained, margin): minimal interior margin of the evolute."""
    th = TWO_PI * np.arange(scan_points) / scan_points
    E = curve.evolute(th)
    grid = curve.grid()
    h, _, _, _ = curve.eval(grid)
    proj = np.outer(E[:, 0], np.sin(grid)) - np.outer(E[:, 1], np.cos(grid))
    margin = float(np.min(h[None, :] - proj))
    return margin > 0.0, margin


def diffeo_certificate(curve: SupportCurve, j: int, scan_points: int = 2048):
    """Certify that A_m is a diffeomorphism for m = 1..j.

    ok iff no A'_m changes sign or dips below tolerance on a dense scan
    (refined around minima); returns (ok, min |A'|, witness angle or None).
    """
    th = TWO_PI * np.arange(scan_points) / scan_points
    data = wavefront_arrays(curve, th, j)
    min_abs = math.inf
    witness = None
    for m in range(1, j + 1):
        dA = data["dA"][m]
        sign_change = np.nonzero(dA[:-1] * dA[1:] < 0)[0]
        if sign_change.size:
            i = int(sign_change[0])
            lo, hi = th[i], th[i + 1]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                val = wavefront(curve, mid, m).dA_m
                if val * wavefront(curve, lo, m).dA_m <= 0:
                    hi = mid
                else:
                    lo = mid
            return False, 0.0, float(0.5 * (lo + hi))
        i_min = int(np.argmin(np.abs(dA)))
        local = np.linspace(th[max(i_min - 1, 0)], th[min(i_min + 1, scan_points - 1)], 33)
        vals = wavefront_arrays(curve, local, m)["dA"][m]
        m_abs = float(np.min(np.abs(vals)))
        if m_abs < min_abs:
            min_abs = m_abs
            witness_candidate = float(local[int(np.argmin(np.abs(vals)))])
            if m_abs <= 1e-9:
                return False, m_abs, witness_candidate
    return True, min_abs, witness


def np_detect(curve: SupportCurve, n: int, scan_points: int = 4096,
              residual_tolerance: float = 1e-9,
              continuum_tolerance: float = 1e-10) -> NPDetectResult:
    """Roots of g_n(theta) = phi_n(theta) - pi/2 on a dense grid.

    Orbits are deduplicated over {theta0, theta1} and over antipodal
    relabeling; ones that revisit Gamma before step n (diameter shuttling
    and other lower-period repeats) are flagged reducible.
    """
    th = TWO_PI * np.arange(scan_points) / scan_points
    data = wavefront_arrays(curve, th, n)
    g = data["phi"][n] - HALF_PI
    if float(np.max(np.abs(g))) < continuum_tolerance:
        return NPDetectResult(n, True, ())
    gc = np.append(g, g[0])
    roots = []
    for i in range(scan_points):
        if gc[i] == 0.0:
            roots.append(th[i])
        elif gc[i] * gc[i + 1] < 0:
            lo = th[i]
            hi = th[i] + (th[1] - th[0])
            sign_lo = 1.0 if gc[i] > 0 else -1.0
            # Newton with the propagated dphi_n, bisection safeguarded
            x = 0.5 * (lo + hi)
            for _ in range(80):
                wf = wavefront(curve, x, n)
                gx = wf.phi_m - HALF_PI
                if gx * sign_lo > 0:
                    lo = x
                else:
                    hi = x
                x_new = x - gx / wf.dphi_m if wf.dphi_m != 0 else math.nan
                if not (lo < x_new < hi) or not math.isfinite(x_new):
                    x_new = 0.5 * (lo + hi)
                if abs(x_new - x) < 1e-14:
                    x = x_new
                    break
                x = x_new
            roots.append(float(x))
    orbits = []
    seen = set()
    for r in roots:
        wf = wavefront(curve, r, n)
        residual = abs(wf.phi_m - HALF_PI)
        if residual > residual_tolerance:
            continue
        theta1 = wf.A_m
        reducible = any(abs(p - HALF_PI) < 1e-7 for p in wf.phi_history[1:n])
        key = tuple(sorted((round((r % math.pi), 6), round((theta1 % math.pi), 6))))
        if key in seen:
            continue
        seen.add(key)
        orbits.append(NormalOrbit(r % TWO_PI, theta1 % TWO_PI, n, residual, reducible))
    return NPDetectResult(n, False, tuple(orbits))
