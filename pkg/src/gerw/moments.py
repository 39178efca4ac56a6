"""Exact first and second moments of S_n, the martingale M_n and a path oracle."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from . import families as fam
from ._numerics import kahan_cumsum

__all__ = [
    "MomentTable",
    "PathOracleResult",
    "exact_mean",
    "exact_second_moment",
    "moment_table",
    "mean_closed_form",
    "second_moment_closed_form",
    "enumerate_paths",
    "conditional_mean",
    "martingale_values",
    "martingale_increments",
    "ENUMERATION_CAP",
]

ENUMERATION_CAP = 20


def _check_q(q):
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")


@njit(cache=True)
def _mean_rec(av, ev, q):
    N = av.shape[0]
    m = np.empty(N)
    m[0] = 2.0 * q - 1.0
    for n in range(1, N):
        a = av[n - 1]
        m[n] = (1.0 + a / n) * m[n - 1] + (1.0 - a) * ev[n - 1]
    return m


@njit(cache=True)
def _second_rec(av, ev, m):
    N = av.shape[0]
    s = np.empty(N)
    s[0] = 1.0
    for n in range(1, N):
        a = av[n - 1]
        s[n] = (1.0 + 2.0 * a / n) * s[n - 1] + 2.0 * (1.0 - a) * ev[n - 1] * m[n - 1] + 1.0
    return s


@njit(cache=True)
def _var_rec(av, m):
    # Var S_{n+1} = (1 + 2 a/n) Var S_n + 1 - (E S_{n+1} - E S_n)^2, free of cancellation
    N = av.shape[0]
    v = np.empty(N)
    v[0] = 1.0 - m[0] * m[0]
    for n in range(1, N):
        d = m[n] - m[n - 1]
        v[n] = (1.0 + 2.0 * av[n - 1] / n) * v[n - 1] + 1.0 - d * d
        if v[n] < 0.0:
            v[n] = 0.0
    return v


def _values(alpha, eps, N):
    return fam.alpha_values(alpha, N).values, fam.eps_values(eps, N).values


def exact_mean(alpha, eps, q: float, N: int) -> np.ndarray:
    """E[S_n] for n = 1..N by the one-step recursion."""
    _check_q(q)
    av, ev = _values(alpha, eps, N)
    return _mean_rec(av, ev, float(q))


def exact_second_moment(alpha, eps, q: float, N: int) -> np.ndarray:
    """E[S_n^2] for n = 1..N by the one-step recursion."""
    _check_q(q)
    av, ev = _values(alpha, eps, N)
    return _second_rec(av, ev, _mean_rec(av, ev, float(q)))


@dataclass(frozen=True)
class MomentTable:
    N: int
    q: float
    mean: np.ndarray = field(repr=False)
    second: np.ndarray = field(repr=False)
    variance: np.ndarray = field(repr=False)

    def to_csv(self, path, rows=None) -> None:
        idx = np.arange(self.N) if rows is None else np.asarray(rows, dtype=np.int64) - 1
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "mean", "second", "variance"])
            for i in idx:
                wr.writerow([int(i) + 1, repr(float(self.mean[i])), repr(float(self.second[i])), repr(float(self.variance[i]))])


def moment_table(alpha, eps, q: float, N: int) -> MomentTable:
    """Means, second moments and variances up to N.

    The variance comes from its own recursion rather than second - mean**2,
    which loses all digits when the walk is nearly deterministic.
    """
    _check_q(q)
    av, ev = _values(alpha, eps, N)
    m = _mean_rec(av, ev, float(q))
    return MomentTable(N=N, q=float(q), mean=m, second=_second_rec(av, ev, m), variance=_var_rec(av, m))


def mean_closed_form(table, q: float) -> np.ndarray:
    """E[S_n] = a_n (2q - 1 + sum_{k<n} (1 - alpha_k) eps_k / a_{k+1}), from a ScalingTable.

    The divisor is a_{k+1}: dividing the mean recursion by a_{n+1} telescopes
    exactly to this sum.  The variant with a_k differs by the factor
    1 + alpha_k / k per term and already fails at n = 2.
    """
    terms = (1.0 - table.alpha_n[:-1]) * table.eps_n[:-1] * np.exp(-table.log_a[1:])
    acc = np.concatenate(([0.0], kahan_cumsum(terms)))
    return table.a * (2.0 * q - 1.0 + acc)


def second_moment_closed_form(table, mean: np.ndarray) -> np.ndarray:
    """E[S_n^2] = b_n (sum_{k<=n} 1/b_k + 2 sum_{k<n} (1 - alpha_k) eps_k E[S_k] / b_{k+1})."""
    inv_b = np.exp(-table.log_b)
    first = kahan_cumsum(inv_b)
    terms = 2.0 * (1.0 - table.alpha_n[:-1]) * table.eps_n[:-1] * mean[:-1] * inv_b[1:]
    second = np.concatenate(([0.0], kahan_cumsum(terms)))
    return table.b * (first + second)


# ---------------------------------------------------------------------------
# path oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathOracleResult:
    n: int
    mean: float
    second: float
    distribution: dict  # S_n -> probability
    signs: Optional[np.ndarray] = field(default=None, repr=False)  # (2^n, n) int8, when kept
    probs: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def total(self) -> float:
        return math.fsum(self.distribution.values())


def enumerate_paths(alpha, eps, q: float, n: int, cap: int = ENUMERATION_CAP, keep_paths: bool = False) -> PathOracleResult:
    """Exact law of S_n by multiplying step probabilities along all 2^n sign sequences."""
    _check_q(q)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > min(cap, ENUMERATION_CAP):
        raise ValueError(f"n = {n} exceeds the enumeration cap {min(cap, ENUMERATION_CAP)}")
    av = [fam.eval_alpha(alpha, k) for k in range(1, n + 1)]
    ev = [fam.eval_eps(eps, k) for k in range(1, n + 1)]

    # bit j of a path index is the sign of step j + 1
    idx = np.arange(2**n, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)
    prob = np.where(bits[:, 0] == 1, q, 1.0 - q)
    plus = bits[:, 0].astype(np.int64)
    for k in range(1, n):
        # step k + 1 copies one of the first k steps with prob alpha_k, else is a fresh eps_k-biased step
        p_up = av[k - 1] * plus / k + (1.0 - av[k - 1]) * (1.0 + ev[k - 1]) / 2.0
        up = bits[:, k] == 1
        prob = prob * np.where(up, p_up, 1.0 - p_up)
        plus = plus + up
    S = 2 * plus - n

    order = np.argsort(S, kind="stable")
    S_sorted, p_sorted = S[order], prob[order]
    cuts = np.flatnonzero(np.diff(S_sorted)) + 1
    dist = {}
    for s_vals, p_vals in zip(np.split(S_sorted, cuts), np.split(p_sorted, cuts)):
        dist[int(s_vals[0])] = math.fsum(np.sort(p_vals))
    mean = math.fsum(s * p for s, p in dist.items())
    second = math.fsum(s * s * p for s, p in dist.items())
    signs = (2 * bits - 1).astype(np.int8) if keep_paths else None
    return PathOracleResult(n=n, mean=mean, second=second, distribution=dist, signs=signs, probs=prob if keep_paths else None)


# ---------------------------------------------------------------------------
# martingale
# ---------------------------------------------------------------------------


def conditional_mean(S_prev: np.ndarray, n_prev: np.ndarray, alpha_n: np.ndarray, eps_n: np.ndarray, q: float) -> np.ndarray:
    """E[X_{n+1} | F_n] = alpha_n S_n / n + (1 - alpha_n) eps_n; 2q - 1 for the first step.

    ``alpha_n`` and ``eps_n`` are the full per-n arrays (index n - 1).
    """
    n_prev = np.asarray(n_prev)
    out = np.full(np.shape(S_prev), 2.0 * q - 1.0, dtype=float)
    mask = n_prev >= 1
    k = n_prev[mask] - 1
    out[mask] = alpha_n[k] * np.asarray(S_prev)[mask] / n_prev[mask] + (1.0 - alpha_n[k]) * eps_n[k]
    return out


def martingale_values(trajectory, moments: MomentTable, table) -> tuple:
    """(n, M_n) with M_n = (S_n - E[S_n]) / a_n along a trajectory.

    Uses the full step record when the trajectory carries one, otherwise
    the checkpoint values.
    """
    if trajectory.steps is not None:
        n = np.arange(1, trajectory.steps.shape[0] + 1)
        S = np.cumsum(trajectory.steps, dtype=np.int64)
    else:
        n = np.asarray(trajectory.checkpoints)
        S = np.asarray(trajectory.values)
    if n.size == 0 or n[-1] > min(moments.N, table.N):
        raise ValueError("trajectory horizon exceeds the moment or scaling table horizon")
    return n, (S - moments.mean[n - 1]) / table.a[n - 1]


def martingale_increments(steps: np.ndarray, table, q: float) -> np.ndarray:
    """d_j = (X_j - E[X_j | F_{j-1}]) / a_j for j = 1..len(steps)."""
    steps = np.asarray(steps, dtype=np.int64)
    N = steps.shape[0]
    if N > table.N:
        raise ValueError("step record longer than the scaling table")
    S = np.cumsum(steps)
    S_prev = np.concatenate(([0], S[:-1]))
    cm = conditional_mean(S_prev, np.arange(N), table.alpha_n, table.eps_n, q)
    return (steps - cm) / table.a[:N]
