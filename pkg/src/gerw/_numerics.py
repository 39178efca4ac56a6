"""Compensated prefix sums and an accurate log-Gamma ratio."""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.special import gammaln

# B_{2k} / (2k (2k - 1)) for k = 1..6
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360)
_SERIES_MIN_N = 20


@njit(cache=True)
def kahan_cumsum(x):
    """Prefix sums with Neumaier compensation, ascending order."""
    out = np.empty(x.shape[0])
    s = 0.0
    comp = 0.0
    for i in range(x.shape[0]):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        out[i] = s + comp
    return out


@njit(cache=True)
def kahan_suffix_sum(x):
    """out[i] = sum(x[i:]) accumulated from the small end."""
    n = x.shape[0]
    out = np.empty(n)
    s = 0.0
    comp = 0.0
    for i in range(n - 1, -1, -1):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        out[i] = s + comp
    return out


def _log1p_minus_x(u):
    u = np.asarray(u, dtype=float)
    small = u < 1e-3
    out = np.empty_like(u)
    us = u[small]
    # -u^2/2 + u^3/3 - u^4/4 + u^5/5 - u^6/6
    out[small] = us * us * (-0.5 + us * (1 / 3 + us * (-0.25 + us * (0.2 - us / 6))))
    ub = u[~small]
    out[~small] = np.log1p(ub) - ub
    return out


def gamma_ratio_excess(alpha: float, n) -> np.ndarray:
    """log(Gamma(n + alpha) / (Gamma(n) n**alpha)), free of cancellation for large n.

    Tends to 0 like -alpha (1 - alpha) / (2 n).
    """
    n = np.atleast_1d(np.asarray(n, dtype=float))
    out = np.empty_like(n)
    small = n < _SERIES_MIN_N
    ns = n[small]
    out[small] = gammaln(ns + alpha) - gammaln(ns) - alpha * np.log(ns)
    nb = n[~small]
    u = alpha / nb
    lu = np.log1p(u)
    val = nb * _log1p_minus_x(u) + (alpha - 0.5) * lu
    val += _STIRLING[0] * (-alpha / (nb * (nb + alpha)))
    for k, b in enumerate(_STIRLING[1:], start=2):
        val += b * nb ** (1 - 2 * k) * np.expm1((1 - 2 * k) * lu)
    out[~small] = val
    return out


def log_gamma_ratio_g(alpha: float, n) -> np.ndarray:
    """log g_n with g_n = Gamma(n + alpha) / (Gamma(n) Gamma(alpha + 1))."""
    n = np.atleast_1d(np.asarray(n, dtype=float))
    out = alpha * np.log(n) + gamma_ratio_excess(alpha, n) - math.lgamma(alpha + 1)
    out[n == 1] = 0.0  # g_1 = 1 exactly
    return out
