"""Period-two orbits (diameters): location, classification, continuation.

A diameter sits at a root of the pair function

    f(theta) = <T(theta), X(theta+pi) - X(theta)> = -h'(theta+pi) - h'(theta),

which only sees the even harmonics of h, is pi-periodic, and vanishes
identically exactly for curves of constant width.  At a root the chord
length equals the width l = h(theta) + h(theta+pi) and

    f'(theta) = h(theta) + h(theta+pi) - R(theta) - R(theta+pi)

drives the classification together with the product
[l - R(theta)][l - R(theta+pi)]:

    hyperbolic:  f' > 0, or f' < 0 with negative product
    elliptic:    f' < 0 with positive product
    parabolic:   f' = 0, or vanishing product

(the sign test is equivalent to |trace DB^2| vs 2 at the orbit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .geometry import SupportCurve, TWO_PI
from .flow import FlowTrajectory

HYPERBOLIC = "hyperbolic"
ELLIPTIC = "elliptic"
PARABOLIC = "parabolic"

_CONTINUUM_REL = 1e-9


@dataclass(frozen=True)
class DiameterOrbit:
    theta: float
    length: float
    klass: str
    residual: float
    f_prime: float


@dataclass
class DiameterBranch:
    samples: list = field(default_factory=list)  # (t, theta, klass)
    terminal_event: str = "survived"             # survived | collided | lost_root


@dataclass(frozen=True)
class DiameterScan:
    continuum: bool
    orbits: tuple


def pair_function(curve: SupportCurve, theta):
    th = np.asarray(theta, float)
    _, hp0, _, _ = curve.eval(th)
    _, hp1, _, _ = curve.eval(th + math.pi)
    return -(hp1 + hp0)


def pair_derivative(curve: SupportCurve, theta):
    th = np.asarray(theta, float)
    h0, _, _, R0 = curve.eval(th)
    h1, _, _, R1 = curve.eval(th + math.pi)
    return h0 + h1 - R0 - R1


def _kprime(curve: SupportCurve, theta):
    """k' = -R'/R^2 evaluated termwise."""
    th = np.asarray(theta, float)
    n = np.arange(curve.cos_coeffs.size)
    w = 1.0 - n * n
    ra = w * curve.cos_coeffs
    rb = w * curve.sin_coeffs
    arg = np.multiply.outer(th, n)
    R = np.cos(arg) @ ra + np.sin(arg) @ rb
    Rp = np.cos(arg) @ (n * rb) - np.sin(arg) @ (n * ra)
    return -Rp / R**2


def f_time_derivative(curve: SupportCurve, theta):
    """f_t = -f + k'(theta+pi) + k'(theta) along the normalized flow."""
    th = np.asarray(theta, float)
    return -pair_function(curve, th) + _kprime(curve, th + math.pi) + _kprime(curve, th)


def classify(curve: SupportCurve, theta: float,
             parabolic_tolerance: float | None = None) -> tuple[str, float, float]:
    """(class, f', chord length) at a diameter root."""
    length = float(curve.width(theta))
    fp = float(pair_derivative(curve, theta))
    if parabolic_tolerance is None:
        parabolic_tolerance = 1e-8 * (1.0 + abs(length))
    if abs(fp) <= parabolic_tolerance:
        return PARABOLIC, fp, length
    if fp > 0:
        return HYPERBOLIC, fp, length
    _, _, _, R0 = curve.eval(theta)
    _, _, _, R1 = curve.eval(theta + math.pi)
    product = (length - float(R0)) * (length - float(R1))
    if abs(product) <= parabolic_tolerance * (1.0 + abs(length)):
        return PARABOLIC, fp, length
    return (ELLIPTIC if product > 0 else HYPERBOLIC), fp, length


def find_diameters(curve: SupportCurve, scan_points: int = 4096,
                   root_tolerance: float = 1e-11) -> DiameterScan:
    """All diameters with one representative per antipodal pair.

    Returns the continuum flag instead of a root list when f vanishes on
    the whole grid (constant width).
    """
    th_full = TWO_PI * np.arange(scan_points) / scan_points
    f_full = pair_function(curve, th_full)
    if np.max(np.abs(f_full)) < _CONTINUUM_REL * curve.perimeter():
        return DiameterScan(True, ())
    half = scan_points // 2
    th = th_full[: half + 1]
    fv = np.append(f_full[:half], f_full[half])
    orbits = []
    for i in range(half):
        if fv[i] == 0.0:
            root = float(th[i])
        elif fv[i] * fv[i + 1] < 0:
            root = brentq(lambda x: float(pair_function(curve, x)),
                          th[i], th[i + 1], xtol=1e-15, rtol=8.9e-16)
        else:
            continue
        if orbits and abs(root - orbits[-1].theta) < 1e-10:
            continue
        klass, fp, length = classify(curve, root)
        residual = abs(float(pair_function(curve, root)))
        if residual > root_tolerance * (1.0 + curve.perimeter()):
            continue
        orbits.append(DiameterOrbit(root % math.pi, length, klass, residual, fp))
    return DiameterScan(False, tuple(orbits))


def integrated_f(trajectory: FlowTrajectory, theta: float,
                 t0: float | None = None, t: float | None = None) -> float:
    """Integral form f(t) = e^{t0-t} f(t0) + int_{t0}^t e^{s-t} g(s) ds with
    g(s) = k'(s, theta+pi) + k'(s, theta), trapezoid over the snapshots."""
    times = np.asarray(trajectory.times)
    if t0 is None:
        t0 = float(times[0])
    if t is None:
        t = float(times[-1])
    if t0 < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError("requested interval outside the trajectory span")
    mask = (times >= t0 - 1e-12) & (times <= t + 1e-12)
    idx = np.nonzero(mask)[0]
    ts = times[idx]
    g = np.array([float(_kprime(st.curve, theta + math.pi) + _kprime(st.curve, theta))
                  for st in (trajectory.states[i] for i in idx)])
    weights = np.exp(ts - t)
    integral = np.trapezoid(weights * g, ts)
    f0 = float(pair_function(trajectory.states[idx[0]].curve, theta))
    return math.exp(t0 - t) * f0 + float(integral)


def parabolic_witness(curve: SupportCurve, theta: float,
                      root_tolerance: float = 1e-8) -> float:
    """|E(theta+pi) - E(theta)| = sqrt(f^2 + f'^2); zero iff parabolic."""
    f = float(pair_function(curve, theta))
    if abs(f) > root_tolerance * (1.0 + curve.perimeter()):
        raise ValueError(f"theta={theta} is not a diameter root (f={f:.3e})")
    d = curve.evolute(theta + math.pi) - curve.evolute(theta)
    return float(np.hypot(d[0], d[1]))


def continue_branch(trajectory: FlowTrajectory, seed: DiameterOrbit,
                    window: float = 0.35) -> DiameterBranch:
    """Follow a diameter root across the trajectory snapshots.

    Tangent predictor theta += dt * f_t / (-f') where f' is usable, plain
    continuation otherwise; the corrector is a bracketed solve in a window
    around the prediction.  Root loss ends the branch with `lost_root`,
    a vanishing bracket with nearly zero f' ends it with `collided`.
    """
    branch = DiameterBranch()
    theta = seed.theta
    times = trajectory.times
    for i, state in enumerate(trajectory.states):
        curve = state.curve
        if i > 0:
            dt = times[i] - times[i - 1]
            prev = trajectory.states[i - 1].curve
            fp = float(pair_derivative(prev, theta))
            ft = float(f_time_derivative(prev, theta))
            if abs(fp) > 1e-6:
                theta = theta + dt * ft / (-fp)
        f_here = lambda x: float(pair_function(curve, x))
        lo, hi = theta - window, theta + window
        flo, fhi = f_here(lo), f_here(hi)
        root = None
        if flo == 0.0:
            root = lo
        elif flo * fhi < 0:
            root = brentq(f_here, lo, hi, xtol=1e-15, rtol=8.9e-16)
        else:
            # no sign change: either fold (collision) or real loss
            grid = np.linspace(lo, hi, 65)
            vals = pair_function(curve, grid)
            j = int(np.argmin(np.abs(vals)))
            if j not in (0, len(grid) - 1) and vals[j - 1] * vals[j + 1] > 0 \
                    and abs(float(pair_derivative(curve, grid[j]))) < 1e-4:
                branch.terminal_event = "collided"
            else:
                branch.terminal_event = "lost_root"
            return branch
        theta = float(root)
        klass, _, _ = classify(curve, theta)
        branch.samples.append((state.t, theta, klass))
    branch.terminal_event = "survived"
    return branch
