"""Elliptic integrals and Jacobi functions via the arithmetic-geometric mean.

Modulus convention throughout: K(k), F(phi, k), sn(u, k) with 0 <= k < 1
(not the squared parameter m = k^2).  F and am are extended to the whole
real line by quasi-periodicity, F(phi + pi) = F(phi) + 2K.
"""

from __future__ import annotations

import math

import numpy as np

_MAX_ITER = 40
_EPS = 2.2204460492503131e-16


def _check_modulus(k: float) -> float:
    k = float(k)
    if not (0.0 <= k < 1.0):
        raise ValueError(f"modulus k={k} outside [0, 1)")
    return k


def elliptic_K(k: float) -> float:
    """Complete elliptic integral of the first kind, K = pi / (2 agm(1, k'))."""
    k = _check_modulus(k)
    a, b = 1.0, math.sqrt(1.0 - k * k)
    while abs(a - b) > _EPS * a:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def _agm_scheme(k: float):
    """Descending Landen sequences (a_n, c_n) down to c_N ~ 0."""
    a = [1.0]
    c = [k]
    b = math.sqrt(1.0 - k * k)
    while c[-1] > _EPS * a[-1] and len(a) < _MAX_ITER:
        a_next = 0.5 * (a[-1] + b)
        c.append(0.5 * (a[-1] - b))
        b = math.sqrt(a[-1] * b)
        a.append(a_next)
    return a, c


def elliptic_F(phi: float, k: float) -> float:
    """Incomplete integral F(phi, k) for any real phi (quasi-periodic).

    Computed as the Newton inverse of the amplitude, F = am^{-1}; the
    derivative of am is dn >= k' > 0 so the iteration is safe for k < 1.
    """
    k = _check_modulus(k)
    if k == 0.0:
        return float(phi)
    n_half = round(phi / math.pi)
    phi_r = phi - n_half * math.pi  # in [-pi/2, pi/2]
    K = elliptic_K(k)
    offset = 2.0 * n_half * K
    if phi_r == 0.0:
        return offset
    sign = 1.0 if phi_r > 0 else -1.0
    target = abs(phi_r)
    # safeguarded Newton on [0, K]; am is monotone there with am' = dn > 0
    lo, hi = 0.0, K
    u = 2.0 * K * target / math.pi
    for _ in range(200):
        f = jacobi_am(u, k) - target
        if f > 0:
            hi = u
        else:
            lo = u
        dn = jacobi(u, k)[2]
        u_new = u - f / dn
        if not (lo < u_new < hi):
            u_new = 0.5 * (lo + hi)
        if abs(u_new - u) < 1e-16 * (1.0 + abs(u_new)) or hi - lo < 1e-16 * K:
            u = u_new
            break
        u = u_new
    return offset + sign * u


def jacobi_am(u, k: float):
    """Jacobi amplitude am(u, k) for scalar or array u."""
    k = _check_modulus(k)
    uu = np.asarray(u, float)
    if k == 0.0:
        out = uu.copy()
        return float(out) if out.ndim == 0 else out
    a, c = _agm_scheme(k)
    last = len(a) - 1
    phi = (2.0 ** last) * a[last] * uu
    for n in range(last, 0, -1):
        phi = 0.5 * (phi + np.arcsin(np.clip(c[n] / a[n] * np.sin(phi), -1.0, 1.0)))
    return float(phi) if phi.ndim == 0 else phi


def jacobi(u, k: float):
    """Return (sn, cn, dn) at u for modulus k; u scalar or array."""
    k = _check_modulus(k)
    uu = np.asarray(u, float)
    if k == 0.0:
        sn, cn = np.sin(uu), np.cos(uu)
        dn = np.ones_like(uu)
    else:
        a, c = _agm_scheme(k)
        last = len(a) - 1
        phi = (2.0 ** last) * a[last] * uu
        phi_prev = phi
        for n in range(last, 0, -1):
            phi_prev = phi
            phi = 0.5 * (phi + np.arcsin(np.clip(c[n] / a[n] * np.sin(phi), -1.0, 1.0)))
        sn, cn = np.sin(phi), np.cos(phi)
        dn = cn / np.cos(phi_prev - phi)
    if uu.ndim == 0:
        return float(sn), float(cn), float(dn)
    return sn, cn, dn
