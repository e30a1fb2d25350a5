"""Normalized curve-shortening flow in support-function form.

The evolution is h_t = h - k with k = 1/(h + h'') evaluated pseudo-
spectrally (2x zero padding for the reciprocal), advanced by classical
RK4 on the harmonic coefficients.  After every step the curve is rescaled
so the enclosed area is exactly pi; the continuous normalized flow keeps
the area constant, so the projection only removes integrator drift.

Time is the normalized time of the rescaled flow; the unit circle is the
stationary state and perturbations decay like exp((2 - n^2) t) per
harmonic n, so the slowest surviving mode (n = 2 for centered curves)
gives the decay rate ~ -2 of ||k - 1||.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import SupportCurve, CurveError, TWO_PI, _grid_size_for


class FlowError(RuntimeError):
    """Convexity loss, projection blow-up, or an invalid flow request."""


@dataclass(frozen=True)
class FlowState:
    t: float
    curve: SupportCurve


@dataclass
class FlowTrajectory:
    """Time-ordered snapshots with per-state diagnostics."""

    states: list = field(default_factory=list)
    step_size: float = 1e-3
    times: list = field(default_factory=list)
    areas: list = field(default_factory=list)
    entropies: list = field(default_factory=list)
    w_values: list = field(default_factory=list)
    k_norms: list = field(default_factory=list)
    kprime_norms: list = field(default_factory=list)

    def append(self, state: FlowState):
        if self.times and state.t <= self.times[-1]:
            raise FlowError("trajectory times must increase strictly")
        curve = state.curve
        th = curve.grid()
        _, _, _, R = curve.eval(th)
        k = 1.0 / R
        # k' = -R'/R^2 with R' evaluated termwise
        n = np.arange(curve.cos_coeffs.size)
        ra = (1.0 - n * n) * curve.cos_coeffs
        rb = (1.0 - n * n) * curve.sin_coeffs
        arg = np.multiply.outer(th, n)
        rp = np.cos(arg) @ (n * rb) - np.sin(arg) @ (n * ra)
        self.states.append(state)
        self.times.append(state.t)
        self.areas.append(curve.area())
        self.entropies.append(curve.entropy())
        self.w_values.append(curve.log_support_integral())
        self.k_norms.append(float(np.max(np.abs(k - 1.0))))
        self.kprime_norms.append(float(np.max(np.abs(-rp / R**2))))

    def state_at(self, t: float) -> FlowState:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > 1e-9 + 1e-9 * abs(t):
            raise FlowError(f"no snapshot at t={t}")
        return self.states[i]


# -- spectral plumbing -------------------------------------------------------


def _values_on(acos, asin, n_points):
    spec = np.zeros(n_points // 2 + 1, complex)
    m = acos.size - 1
    spec[0] = acos[0] * n_points
    spec[1 : m + 1] = (acos[1:] - 1j * asin[1:]) * (n_points / 2.0)
    return np.fft.irfft(spec, n_points)


def _coeffs_from(values, m):
    sp = np.fft.rfft(values) / values.size
    acos = np.empty(m + 1)
    asin = np.zeros(m + 1)
    acos[0] = sp[0].real
    acos[1:] = 2.0 * sp[1 : m + 1].real
    asin[1:] = -2.0 * sp[1 : m + 1].imag
    return acos, asin


def _area_of(acos, asin):
    n = np.arange(acos.size)
    return math.pi * (acos[0] ** 2 + 0.5 * np.sum((1.0 - n[1:] ** 2) * (acos[1:] ** 2 + asin[1:] ** 2)))


def _rhs(acos, asin, n_grid):
    """Coefficients of h - 1/R with 2x dealiased reciprocal; also min R."""
    n = np.arange(acos.size)
    w = 1.0 - n * n
    r_vals = _values_on(w * acos, w * asin, 2 * n_grid)
    r_min = float(np.min(r_vals))
    if r_min <= 0.0:
        raise FlowError(f"convexity lost: min R = {r_min:.3e}")
    ka, kb = _coeffs_from(1.0 / r_vals, acos.size - 1)
    return acos - ka, asin - kb, r_min


def time_derivative(curve: SupportCurve):
    """Spectral coefficients (cos, sin) of h_t = h - k for the curve."""
    da, db, _ = _rhs(curve.cos_coeffs, curve.sin_coeffs, curve.grid_size)
    return da, db


def stability_bound(curve: SupportCurve, factor: float = 0.5) -> float:
    """Parabolic step-size heuristic factor * (min R)^2 / harmonic_count^2."""
    _, _, _, R = curve.eval(curve.grid())
    m = curve.harmonic_count
    return factor * float(np.min(R)) ** 2 / m**2


def _rk4(acos, asin, n_grid, dt):
    k1a, k1b, r_min = _rhs(acos, asin, n_grid)
    k2a, k2b, _ = _rhs(acos + 0.5 * dt * k1a, asin + 0.5 * dt * k1b, n_grid)
    k3a, k3b, _ = _rhs(acos + 0.5 * dt * k2a, asin + 0.5 * dt * k2b, n_grid)
    k4a, k4b, _ = _rhs(acos + dt * k3a, asin + dt * k3b, n_grid)
    na = acos + dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
    nb = asin + dt / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
    return na, nb, r_min


def _project_area(acos, asin):
    factor = math.sqrt(math.pi / _area_of(acos, asin))
    if not 0.5 <= factor <= 2.0:
        raise FlowError(f"area projection factor {factor:.3f} outside [0.5, 2]")
    return factor * acos, factor * asin


def step(state: FlowState, dt: float, stability_factor: float = 0.5) -> FlowState:
    """One RK4 step followed by the exact area projection.

    dt must respect the stability bound; evolve() substeps automatically,
    this primitive refuses instead.
    """
    if dt <= 0:
        raise FlowError("dt must be positive")
    bound = stability_bound(state.curve, stability_factor)
    if dt > bound * (1 + 1e-12):
        raise FlowError(f"dt={dt:.3e} exceeds stability bound {bound:.3e}")
    curve = state.curve
    try:
        na, nb, _ = _rk4(curve.cos_coeffs, curve.sin_coeffs, curve.grid_size, dt)
        na, nb = _project_area(na, nb)
        new_curve = SupportCurve(na, nb, curve.grid_size)
    except (FlowError, CurveError) as exc:
        raise FlowError(f"step failed at t={state.t:.6f}: {exc}") from exc
    return FlowState(state.t + dt, new_curve)


def _trim(acos, asin, tol):
    """Drop trailing harmonics below tol relative to a0; keep at least 4."""
    m = acos.size - 1
    mag = np.maximum(np.abs(acos), np.abs(asin))
    cut = tol * max(abs(acos[0]), 1e-300)
    while m > 4 and mag[m] < cut and mag[m - 1] < cut:
        m -= 1
    return acos[: m + 1].copy(), asin[: m + 1].copy()


def evolve(state: FlowState, t_target: float, dt: float = 1e-3,
           snapshot_stride: float = 0.05, stability_factor: float = 0.5,
           trim: bool = True, trim_tol: float = 1e-14) -> FlowTrajectory:
    """Advance to t_target, recording a snapshot every snapshot_stride.

    The effective step is min(dt, stability bound) recomputed from the
    current curve, so a stiff early phase substeps automatically; snapshot
    times land exactly on the stride grid.  With trim enabled, harmonics
    that have decayed below trim_tol relative are dropped at snapshots
    (the flow contracts mode n like exp((2 - n^2) t), so the spectral
    support shrinks rapidly).
    """
    if t_target <= state.t:
        raise FlowError("t_target must exceed the initial time")
    traj = FlowTrajectory(step_size=dt)
    traj.append(state)
    acos = state.curve.cos_coeffs.copy()
    asin = state.curve.sin_coeffs.copy()
    n_grid = state.curve.grid_size
    t = state.t
    n_snaps = int(round((t_target - state.t) / snapshot_stride))
    snap_times = state.t + snapshot_stride * np.arange(1, max(n_snaps, 1) + 1)
    if snap_times[-1] < t_target - 1e-12:
        snap_times = np.append(snap_times, t_target)
    try:
        for t_snap in snap_times:
            while t < t_snap - 1e-13:
                m = acos.size - 1
                n = np.arange(m + 1)
                r_min = float(np.min(_values_on((1.0 - n * n) * acos,
                                                (1.0 - n * n) * asin, n_grid)))
                if r_min <= 0.0:
                    raise FlowError(f"convexity lost: min R = {r_min:.3e}")
                bound = stability_factor * r_min**2 / m**2
                n_sub = max(1, int(math.ceil((t_snap - t) / min(dt, bound))))
                dt_eff = (t_snap - t) / n_sub
                acos, asin, _ = _rk4(acos, asin, n_grid, dt_eff)
                acos, asin = _project_area(acos, asin)
                t += dt_eff
            t = float(t_snap)
            if trim:
                acos, asin = _trim(acos, asin, trim_tol)
                n_grid = _grid_size_for(acos.size - 1)
                acos, asin = _project_area(acos, asin)
            traj.append(FlowState(t, SupportCurve(acos, asin, n_grid)))
    except (FlowError, CurveError) as exc:
        raise FlowError(f"evolve failed at t={t:.6f}: {exc}") from exc
    return traj


def decay_rates(traj: FlowTrajectory, t_min: float | None = None,
                t_max: float | None = None):
    """Least-squares slopes of log ||k-1||_inf and log ||k'||_inf vs t.

    Uses the asymptotic tail (||k-1|| < 0.2 and above the roundoff floor),
    optionally clipped to [t_min, t_max]; needs at least 10 usable states.
    """
    t = np.asarray(traj.times)
    kn = np.asarray(traj.k_norms)
    kp = np.asarray(traj.kprime_norms)
    mask = (kn < 0.2) & (kn > 1e-13) & (kp > 1e-13)
    if t_min is not None:
        mask &= t >= t_min
    if t_max is not None:
        mask &= t <= t_max
    if np.count_nonzero(mask) < 10:
        raise FlowError("too few asymptotic states: no decay to fit")
    tt = t[mask]
    rate_k = np.polyfit(tt, np.log(kn[mask]), 1)[0]
    rate_kp = np.polyfit(tt, np.log(kp[mask]), 1)[0]
    return float(rate_k), float(rate_kp)
