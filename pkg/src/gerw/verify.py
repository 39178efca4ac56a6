"""Statistical checks of predicted limit laws against ensemble data.

Every check returns a self-contained :class:`TestReport`.  Centring and
scaling always use exact moments and deterministic sequences, never Monte
Carlo plug-ins.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import kolmogi, ndtr

__all__ = [
    "TestReport",
    "ks_distance",
    "ks_critical",
    "verify_lln",
    "verify_l2",
    "verify_clt",
    "verify_drift_fluctuation",
    "verify_lil",
    "quad_variation_curve",
    "verify_quad_variation",
    "verify_rate",
    "write_summary_csv",
    "lil_phi",
]


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    kind: str
    checkpoints: list
    statistics: dict  # name -> per-checkpoint values
    thresholds: dict
    passed: list  # per checkpoint
    mandatory: list  # per checkpoint
    verdict: bool = False
    advisory: bool = False
    flags: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.verdict = bool(all(p for p, mand in zip(self.passed, self.mandatory) if mand)) and "degenerate" not in self.flags

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_rows(self):
        """(test, n, statistic, threshold, verdict) per checkpoint for the primary statistic."""
        name = next(iter(self.statistics))
        thr = self.thresholds.get(name)
        for i, n in enumerate(self.checkpoints):
            t = thr[i] if isinstance(thr, list) else thr
            yield (self.kind, n, self.statistics[name][i], t, "pass" if self.passed[i] else "fail")


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_summary_csv(reports: Sequence[TestReport], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["test", "n", "statistic", "threshold", "verdict"])
        for rep in reports:
            for row in rep.summary_rows():
                wr.writerow([row[0], int(row[1]), repr(float(row[2])), repr(float(row[3])) if row[3] is not None else "", row[4]])


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------


def ks_distance(sample, mean: float, variance: float) -> float:
    """sup_x |F_m(x) - Phi((x - mean)/sd)| for the empirical CDF F_m."""
    if not variance > 0:
        raise ValueError("variance must be positive")
    x = np.sort(np.asarray(sample, dtype=float))
    m = x.size
    if m == 0:
        raise ValueError("sample must be non-empty")
    F = ndtr((x - mean) / math.sqrt(variance))
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def ks_critical(m: int, delta: float = 0.01) -> float:
    """Asymptotic Kolmogorov critical value c(delta)/sqrt(m)."""
    return float(kolmogi(delta)) / math.sqrt(m)


def _samples(ensemble, checkpoints=None):
    if hasattr(ensemble, "samples"):
        return np.asarray(ensemble.samples), np.asarray(ensemble.checkpoints)
    arr = np.asarray(ensemble)
    if arr.ndim == 1:
        arr = arr[:, None]
    if checkpoints is None:
        checkpoints = np.arange(1, arr.shape[1] + 1)
    return arr, np.asarray(checkpoints)


def _meta(ensemble, extra):
    md = {}
    if hasattr(ensemble, "m"):
        md.update(m=ensemble.m, seed=ensemble.master_seed)
    else:
        md.update(m=int(np.asarray(ensemble).shape[0]))
    md.update(extra or {})
    return md


# ---------------------------------------------------------------------------
# laws of large numbers
# ---------------------------------------------------------------------------


def _as_vector(x, size, name):
    x = np.broadcast_to(np.asarray(x, dtype=float), (size,)).copy()
    if np.any(x == 0):
        raise ValueError(f"{name} must be nonzero at every checkpoint")
    return x


def verify_lln(ensemble, r, tolerance: float = 0.05, checkpoints=None, metadata=None) -> TestReport:
    """mean_i |S_n/r_n - 1| decreasing over checkpoints and below ``tolerance`` at the last one."""
    S, cps = _samples(ensemble, checkpoints)
    r = _as_vector(r, cps.size, "r_n")
    stat = np.mean(np.abs(S / r - 1.0), axis=0)
    dec = [True] + [bool(stat[i] < stat[i - 1] or stat[i] == 0.0) for i in range(1, cps.size)]
    passed = [bool(d) for d in dec]
    passed[-1] = passed[-1] and bool(stat[-1] <= tolerance)
    return TestReport(
        kind="lln",
        checkpoints=cps.tolist(),
        statistics={"mean_abs_dev": stat.tolist()},
        thresholds={"mean_abs_dev": tolerance, "decreasing": True},
        passed=passed,
        mandatory=[True] * cps.size,
        metadata=_meta(ensemble, metadata),
    )


def verify_l2(ensemble, r, mean=None, second=None, tolerance: float = 0.01, moment_tolerance: float = 0.02,
              checkpoints=None, metadata=None) -> TestReport:
    """mean_i (S_n/r_n - 1)^2 decreasing and below ``tolerance``; E[S_n^2]/E[S_n]^2 -> 1 from exact moments."""
    S, cps = _samples(ensemble, checkpoints)
    r = _as_vector(r, cps.size, "r_n")
    stat = np.mean((S / r - 1.0) ** 2, axis=0)
    dec = [True] + [bool(stat[i] < stat[i - 1] or stat[i] == 0.0) for i in range(1, cps.size)]
    passed = list(dec)
    passed[-1] = passed[-1] and bool(stat[-1] <= tolerance)
    stats = {"mean_sq_dev": stat.tolist()}
    thresholds = {"mean_sq_dev": tolerance, "decreasing": True}
    if mean is not None and second is not None:
        ratio = np.asarray(second, dtype=float) / np.asarray(mean, dtype=float) ** 2
        stats["moment_ratio"] = ratio.tolist()
        thresholds["moment_ratio"] = moment_tolerance
        passed[-1] = passed[-1] and bool(abs(ratio[-1] - 1.0) <= moment_tolerance)
    return TestReport(
        kind="l2",
        checkpoints=cps.tolist(),
        statistics=stats,
        thresholds=thresholds,
        passed=passed,
        mandatory=[True] * cps.size,
        metadata=_meta(ensemble, metadata),
    )


# ---------------------------------------------------------------------------
# Gaussian fluctuations
# ---------------------------------------------------------------------------


def _ks_report(kind, Z, cps, mean, variance, delta, ensemble, metadata, extra_stats=None):
    m = Z.shape[0]
    thr = ks_critical(m, delta)
    D, flags = [], []
    for j in range(Z.shape[1]):
        col = Z[:, j]
        if np.all(col == col[0]):
            flags.append("degenerate")
        D.append(ks_distance(col, mean, variance))
    passed = [d <= thr for d in D]
    stats = {"ks_distance": D}
    if extra_stats:
        stats.update(extra_stats)
    return TestReport(
        kind=kind,
        checkpoints=list(map(int, cps)),
        statistics=stats,
        thresholds={"ks_distance": thr, "delta": delta, "c_delta": float(kolmogi(delta))},
        passed=passed,
        mandatory=[False] * (len(cps) - 1) + [True],
        flags=sorted(set(flags)),
        metadata=_meta(ensemble, {"predicted_mean": mean, "predicted_variance": variance, **(metadata or {})}),
    )


def verify_clt(ensemble, centering, scale, mean: float = 0.0, variance: float = 1.0, delta: float = 0.01,
               checkpoints=None, min_m: int = 1000, metadata=None) -> TestReport:
    """KS test of (S_n - centering_n)/scale_n against N(mean, variance); the last checkpoint gates."""
    if not variance > 0:
        raise ValueError("predicted variance must be positive")
    S, cps = _samples(ensemble, checkpoints)
    if S.shape[0] < min_m:
        raise ValueError(f"need at least {min_m} trajectories, got {S.shape[0]}")
    c = np.broadcast_to(np.asarray(centering, dtype=float), (cps.size,))
    s = np.broadcast_to(np.asarray(scale, dtype=float), (cps.size,))
    Z = (S - c) / s
    return _ks_report("clt", Z, cps, mean, variance, delta, ensemble, metadata)


def verify_drift_fluctuation(ensemble, table, moments, n: int, N_big: int, variance: float, which: str = "z",
                             delta: float = 0.01, min_m: int = 1000, metadata=None) -> TestReport:
    """KS test of the fluctuation around the random drift at checkpoint n.

    M_inf is estimated per trajectory by M_{N_big}, so the residual is
    (M_n - M_{N_big}) = -(d_{n+1} + ... + d_{N_big}); it is standardized by
    the matching window of the variance series (z for eps < 1, t when
    eps_n -> 1), i.e. sqrt(sum_{n<k<=N_big} x_k) with x_k = 1/a_k^2 or
    (1 - eps_k^2)/a_k^2.
    """
    if N_big <= n:
        raise ValueError("N_big must exceed the test checkpoint n")
    if which not in ("z", "t"):
        raise ValueError("which must be 'z' or 't'")
    if table.N < N_big or moments.N < N_big:
        raise ValueError("tables must reach N_big")
    S_n = ensemble.at(n).astype(float)
    S_N = ensemble.at(N_big).astype(float)
    if S_n.size < min_m:
        raise ValueError(f"need at least {min_m} trajectories, got {S_n.size}")
    a_n, a_N = table.a[n - 1], table.a[N_big - 1]
    M_hat = (S_N - moments.mean[N_big - 1]) / a_N
    partial = table.w if which == "z" else table.v
    window = partial[N_big - 1] - partial[n - 1]
    resid = (S_n - moments.mean[n - 1] - a_n * M_hat) / (a_n * math.sqrt(window))
    extra = {"window_variance_sum": [window], "a_n2_tail_over_n": [a_n ** 2 * window / n]}
    if which == "z" and not math.isnan(table.z[n - 1]):
        extra["a_n2_z_n_over_n"] = [a_n ** 2 * table.z[n - 1] / n]
    rep = _ks_report("drift_fluctuation", resid[:, None], [n], 0.0, variance, delta, ensemble,
                     {"N_big": N_big, "scale": f"a_n*sqrt({which}_n - {which}_Nbig)", **(metadata or {})}, extra)
    return rep


def lil_phi(t):
    """sqrt(2 t log log t)."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(2.0 * t * np.log(np.log(t)))


def verify_lil(paths, n_values, centering, scale, envelope: float, delta_lower: float = 0.4,
               delta_upper: float = 0.15, min_fraction: float = 0.8, metadata=None) -> TestReport:
    """Advisory envelope check: per trajectory, max over the window of |S_n - centering_n| / scale_n.

    ``paths`` holds S_n over ``n_values`` (one row per trajectory).  The
    report passes when at least ``min_fraction`` of trajectories land in
    [(1 - delta_lower) envelope, (1 + delta_upper) envelope].  It is
    advisory: limsup statements have no finite-sample rejection rule.
    """
    P = np.atleast_2d(np.asarray(paths, dtype=float))
    c = np.asarray(centering, dtype=float)
    s = np.asarray(scale, dtype=float)
    stat = np.max(np.abs(P - c) / s, axis=1)
    lo, hi = (1 - delta_lower) * envelope, (1 + delta_upper) * envelope
    inside = (stat >= lo) & (stat <= hi)
    flags = ["heuristic"]
    if np.all(stat == 0):
        flags.append("degenerate")
    frac = float(np.mean(inside))
    n_values = np.asarray(n_values)
    return TestReport(
        kind="lil",
        checkpoints=[int(n_values[-1])],
        statistics={"fraction_in_band": [frac], "running_max": stat.tolist()},
        thresholds={"fraction_in_band": min_fraction, "band": [lo, hi]},
        passed=[frac >= min_fraction],
        mandatory=[True],
        advisory=True,
        flags=flags,
        metadata={"trajectories": int(P.shape[0]), "window": [int(n_values[0]), int(n_values[-1])],
                  "envelope": envelope, **(metadata or {})},
    )


# ---------------------------------------------------------------------------
# quadratic variation and rate
# ---------------------------------------------------------------------------


def quad_variation_curve(trajectory, table, q: float) -> np.ndarray:
    """sum_{k<=n} E[d_k^2 | F_{k-1}] for n = 1..N along one trajectory.

    E[d_k^2 | F_{k-1}] = (1 - E[X_k | F_{k-1}]^2) / a_k^2.
    """
    from .moments import conditional_mean

    steps = getattr(trajectory, "steps", trajectory)
    if steps is None:
        raise ValueError("quadratic variation needs the full step record")
    steps = np.asarray(steps, dtype=np.int64)
    N = steps.shape[0]
    if N > table.N:
        raise ValueError("step record longer than the scaling table")
    S = np.cumsum(steps)
    S_prev = np.concatenate(([0], S[:-1]))
    cm = conditional_mean(S_prev, np.arange(N), table.alpha_n, table.eps_n, q)
    return np.cumsum((1.0 - cm * cm) / table.a[:N] ** 2)


def verify_quad_variation(curves, target, checkpoints, tolerance: float = 0.05, metadata=None) -> TestReport:
    """Median over trajectories of curve_n / target_n within ``tolerance`` of 1 at the last checkpoint."""
    C = np.atleast_2d(np.asarray(curves, dtype=float))
    cps = np.asarray(checkpoints)
    tgt = np.asarray(target, dtype=float)
    ratio = np.median(C[:, cps - 1] / tgt, axis=0)
    passed = [bool(abs(r - 1.0) <= tolerance) for r in ratio]
    return TestReport(
        kind="quad_variation",
        checkpoints=cps.tolist(),
        statistics={"median_ratio": ratio.tolist()},
        thresholds={"median_ratio": tolerance},
        passed=passed,
        mandatory=[False] * (cps.size - 1) + [True],
        metadata={"trajectories": int(C.shape[0]), **(metadata or {})},
    )


def verify_rate(ensemble, eps_n: float, alpha: float, rho: float, n: Optional[int] = None,
                tolerance: float = 0.05, metadata=None) -> TestReport:
    """Median of (S_n/n - 1)/(1 - eps_n) within ``tolerance`` (relative) of -(1-alpha)/(1-(alpha+rho))."""
    if not rho < 0.5:
        raise ValueError("the rate law needs rho < 1/2")
    if eps_n >= 1.0:
        raise ValueError("1 - eps_n vanishes at the checkpoint")
    S, cps = _samples(ensemble)
    n = int(cps[-1]) if n is None else int(n)
    j = int(np.flatnonzero(cps == n)[0])
    stat = (S[:, j] / n - 1.0) / (1.0 - eps_n)
    target = -(1.0 - alpha) / (1.0 - (alpha + rho))
    med = float(np.median(stat))
    return TestReport(
        kind="rate",
        checkpoints=[n],
        statistics={"median": [med], "relative_error": [abs(med / target - 1.0)]},
        thresholds={"median": target, "relative_error": tolerance},
        passed=[abs(med / target - 1.0) <= tolerance],
        mandatory=[True],
        metadata=_meta(ensemble, {"target": target, **(metadata or {})}),
    )
