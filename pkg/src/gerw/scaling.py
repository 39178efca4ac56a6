"""Deterministic sequences of the walk: a_n, b_n, g_n, l_n, rho_n and the sums built on them.

Products are accumulated in the log domain and every sum is a compensated
prefix (or suffix) sum in ascending n, so tables are bit-reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from . import families as fam
from ._numerics import kahan_cumsum, kahan_suffix_sum, log_gamma_ratio_g
from .asymptotics import Form, sum_form

__all__ = [
    "ScalingTable",
    "AsymptoteSpec",
    "PreconditionError",
    "build_table",
    "gamma_ratio_g",
    "estimate_tail",
    "closed_form_asymptote",
    "series_order_sums",
    "DEFAULT_CUTOFF",
]

DEFAULT_CUTOFF = 10**6


class PreconditionError(ValueError):
    """Raised when an operation's convergence precondition does not hold."""


def gamma_ratio_g(alpha: float, n):
    """g_n = Gamma(n + alpha) / (Gamma(n) Gamma(alpha + 1)); scalar in, scalar out."""
    if np.any(np.asarray(n) < 1):
        raise ValueError("n must be >= 1")
    out = np.exp(log_gamma_ratio_g(alpha, n))
    return float(out[0]) if np.ndim(n) == 0 else out


@dataclass(frozen=True)
class ScalingTable:
    """Per-n arrays for n = 1..N (index i holds n = i + 1)."""

    N: int
    alpha_limit: float
    cutoff: int
    alpha_n: np.ndarray = field(repr=False)
    eps_n: np.ndarray = field(repr=False)
    log_a: np.ndarray = field(repr=False)
    log_b: np.ndarray = field(repr=False)
    log_g: np.ndarray = field(repr=False)
    log_l: np.ndarray = field(repr=False)
    log_rho: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    z_err: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    t_err: np.ndarray = field(repr=False)
    C0: float = math.nan
    C0_err: float = math.nan
    Cstar: float = math.nan
    Cstar_err: float = math.nan

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.N + 1)

    @property
    def a(self) -> np.ndarray:
        return np.exp(self.log_a)

    @property
    def b(self) -> np.ndarray:
        return np.exp(self.log_b)

    @property
    def g(self) -> np.ndarray:
        return np.exp(self.log_g)

    @property
    def l(self) -> np.ndarray:  # noqa: E743
        return np.exp(self.log_l)

    @property
    def rho(self) -> np.ndarray:
        return np.exp(self.log_rho)

    def at(self, name: str, n):
        """Value of column ``name`` at n (scalar or array of n)."""
        arr = getattr(self, name)
        idx = np.asarray(n) - 1
        if np.any(idx < 0) or np.any(idx >= self.N):
            raise IndexError(f"n outside table horizon 1..{self.N}")
        out = arr[idx]
        return float(out) if np.ndim(out) == 0 else out

    COLUMNS = ("n", "a", "b", "log_a", "log_b", "g", "l", "rho", "w", "v", "r", "z", "z_err", "t", "t_err")

    def to_csv(self, path, rows=None) -> None:
        idx = np.arange(self.N) if rows is None else np.asarray(rows, dtype=np.int64) - 1
        cols = {
            "n": idx + 1,
            "a": self.a[idx],
            "b": self.b[idx],
            "log_a": self.log_a[idx],
            "log_b": self.log_b[idx],
            "g": self.g[idx],
            "l": self.l[idx],
            "rho": self.rho[idx],
            "w": self.w[idx],
            "v": self.v[idx],
            "r": self.r[idx],
            "z": self.z[idx],
            "z_err": self.z_err[idx],
            "t": self.t[idx],
            "t_err": self.t_err[idx],
        }
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.COLUMNS)
            for i in range(idx.size):
                wr.writerow([int(cols["n"][i])] + [repr(float(cols[c][i])) for c in self.COLUMNS[1:]])


def _shape_tail_ratio(summand: Form, m: int) -> float:
    """int_m^inf f(x) dx / f(m) for the coefficient-free shape f of the summand.

    Integrated in u = log x, normalised at u0 = log m so nothing overflows.
    """
    u0 = math.log(m)

    def g(u):
        e = (summand.p + 1.0) * (u - u0)
        if summand.c:
            e += summand.c * (u ** summand.gamma - u0 ** summand.gamma)
        if summand.s:
            e += summand.s * math.log(u / u0)
        if summand.t:
            e += summand.t * math.log(math.log(u) / math.log(u0))
        return math.exp(e)

    val, _ = integrate.quad(g, u0, np.inf, limit=200, epsabs=0.0, epsrel=1e-10)
    return m * val


def _remainder(x: np.ndarray, summand: Form, M: int):
    """Tail sum beyond M estimated from the asymptotic shape, with an error bound.

    Returns (R, err) where R approximates sum_{k > M} x_k.  The shape integral
    is done numerically; the leading-order tail form alone is off by O(1/log M)
    whenever the summand carries log factors.
    """

    def est(m):
        xm = x[m - 1]
        # integral of the tail from m, minus the Euler-Maclaurin half term
        return xm * _shape_tail_ratio(summand, m) - 0.5 * xm

    R = est(M)
    half = M // 2
    mid = math.fsum(x[half:M])  # k = half+1 .. M
    d = abs(est(half) - (mid + R))
    err = 0.5 * x[M - 1] + d * max(1.0, math.log(M) / math.log(2.0))
    return R, err


def _tail_sums(x: np.ndarray, summand: Optional[Form], N: int):
    M = x.shape[0]
    summ = sum_form(summand)
    if summ.diverges or summ.tail is None:
        raise PreconditionError("series diverges; tail sums are undefined")
    R, err = _remainder(x, summand, M)
    tails = kahan_suffix_sum(x)[:N] + R
    rel = err / tails + 4e-16 * math.log2(M)
    return tails, rel


def build_table(alpha, eps, N: int, cutoff: Optional[int] = None) -> ScalingTable:
    """All deterministic sequences up to horizon N.

    Tail sums z_n, t_n are filled only when family metadata certifies the
    governing series converges; otherwise they are NaN.  The exact part of a
    tail runs to ``cutoff`` (default max(N, 10**6)).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    meta = fam.family_metadata(alpha, eps)
    M = max(N, DEFAULT_CUTOFF if cutoff is None else int(cutoff))
    if not meta.decidable:
        M = N
    av = fam.alpha_values(alpha, M).values
    ev = fam.eps_values(eps, M).values
    alpha_lim = meta.alpha_limit if meta.alpha_limit is not None else float(av[-1])

    k = np.arange(1, M, dtype=float)  # factor index k = 1..M-1
    log_a = np.concatenate(([0.0], kahan_cumsum(np.log1p(av[:-1] / k))))
    log_b = np.concatenate(([0.0], kahan_cumsum(np.log1p(2.0 * av[:-1] / k))))
    dev = av[:-1] - alpha_lim
    log_l = np.concatenate(([0.0], kahan_cumsum(np.log1p(dev / (k + alpha_lim)))))
    log_rho = np.concatenate(([0.0], kahan_cumsum(dev / k)))
    log_g = log_gamma_ratio_g(alpha_lim, np.arange(1, N + 1))

    inv_a2 = np.exp(-2.0 * log_a)
    one_m_e2 = (1.0 - ev) * (1.0 + ev)
    w = kahan_cumsum(inv_a2[:N])
    v = kahan_cumsum((one_m_e2 * inv_a2)[:N])
    r = np.exp(log_a[:N]) * kahan_cumsum(((1.0 - av) * ev * np.exp(-log_a))[:N])

    nan = np.full(N, np.nan)
    z, z_err, t, t_err = nan, nan, nan.copy(), nan.copy()
    if meta.decidable and meta.sum_inv_a2_diverges is False:
        z, z_err = _tail_sums(inv_a2, meta.a ** -2, N)
    if meta.decidable and meta.sum_one_minus_eps_over_a2_diverges is False and meta.one_minus_eps is not None:
        t_summand = meta.one_minus_eps * meta.a ** -2 * (1.0 + meta.eps_limit)
        t, t_err = _tail_sums(one_m_e2 * inv_a2, t_summand, N)

    c0 = np.exp(log_b[:N] - 2.0 * log_a[:N])
    cs = np.exp(log_l[:N] - log_rho[:N])
    half = max(N // 2, 1)
    return ScalingTable(
        N=N,
        alpha_limit=alpha_lim,
        cutoff=M,
        alpha_n=av[:N],
        eps_n=ev[:N],
        log_a=log_a[:N],
        log_b=log_b[:N],
        log_g=log_g,
        log_l=log_l[:N],
        log_rho=log_rho[:N],
        w=w,
        v=v,
        r=r,
        z=z,
        z_err=z_err,
        t=t,
        t_err=t_err,
        C0=float(c0[-1]),
        C0_err=float(abs(c0[-1] - c0[half - 1])),
        Cstar=float(cs[-1]),
        Cstar_err=float(abs(cs[-1] - cs[half - 1])),
    )


def estimate_tail(table: ScalingTable, which: str):
    """(values, relative error bounds) of z_n or t_n over the table horizon."""
    if which not in ("z", "t"):
        raise ValueError("which must be 'z' or 't'")
    vals = getattr(table, which)
    if np.isnan(vals).all():
        raise PreconditionError(f"{which}_n is undefined: the governing series is not certified convergent")
    return vals, getattr(table, which + "_err")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoteSpec:
    """Symbolic asymptote ``constant * form(n)`` of a sequence, or no closed form."""

    target: str
    form: Optional[Form]
    note: str = ""

    @property
    def known(self) -> bool:
        return self.form is not None

    @property
    def tag(self) -> str:
        return self.form.tag() if self.form is not None else "no closed form known"

    @property
    def constant(self) -> Optional[float]:
        """Multiplicative constant, None when it involves unnamed constants."""
        if self.form is None or not self.form.constant_known:
            return None
        return self.form.coef

    def evaluate(self, n):
        """form(n) without the constant."""
        if self.form is None:
            raise ValueError("no closed form known")
        return self.form.evaluate(n)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "form": self.tag,
            "constant": self.constant,
            "constant_expr": None if self.form is None else self.form.constant_tag(),
            "note": self.note,
        }


TARGETS = ("a", "w", "z", "v", "t", "r")


def closed_form_asymptote(alpha, eps, target: str) -> AsymptoteSpec:
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    meta = fam.family_metadata(alpha, eps)
    if not meta.decidable:
        return AsymptoteSpec(target, None, "table families have no closed form")
    a = meta.a
    inv_a2 = a ** -2
    if target == "a":
        return AsymptoteSpec("a", a)
    if target in ("w", "z"):
        s = sum_form(inv_a2, name="w_inf")
        summand = inv_a2
    else:
        summand = None
        if meta.one_minus_eps is not None and target in ("v", "t"):
            summand = meta.one_minus_eps * inv_a2 * (1.0 + meta.eps_limit)
        if target == "r":
            if meta.one_minus_alpha is None or meta.eps is None:
                return AsymptoteSpec("r", None, "r_n vanishes identically")
            summand = meta.one_minus_alpha * meta.eps / a
        if summand is None:
            return AsymptoteSpec(target, None, "summand vanishes identically")
        s = sum_form(summand, name=f"{target}_inf")
    if target in ("w", "v"):
        if s.diverges:
            return AsymptoteSpec(target, s.partial, "" if s.partial else "divergence slower than any covered shape")
        return AsymptoteSpec(target, s.partial, "convergent: tends to a finite limit")
    if target in ("z", "t"):
        if s.diverges:
            return AsymptoteSpec(target, None, "series diverges; tail undefined")
        return AsymptoteSpec(target, s.tail)
    # r_n = a_n * sum_{k<=n} (1 - alpha_k) eps_k / a_k
    if s.partial is None:
        return AsymptoteSpec("r", None, "divergence slower than any covered shape")
    return AsymptoteSpec("r", a * s.partial, "" if s.diverges else "sum converges: r_n ~ const * a_n")


def series_order_sums(c, n: int, log_expsum: bool = False):
    """(sum_k c_k S_k, sum_k c_k exp(S_k)) with S_k = c_1 + ... + c_k, k <= n.

    With ``log_expsum`` the second entry is returned as its logarithm, which
    stays finite when exp(S_n) overflows.
    """
    c = np.asarray(c, dtype=float)[:n]
    if c.shape[0] < n:
        raise ValueError("sequence shorter than n")
    if np.any(c < 0):
        raise ValueError("sequence entries must be nonnegative")
    if n == 0:
        return 0.0, (-math.inf if log_expsum else 0.0)
    S = kahan_cumsum(c)
    selfconv = float(kahan_cumsum(c * S)[-1])
    top = S[-1]
    scaled = float(kahan_cumsum(c * np.exp(S - top))[-1])
    if log_expsum:
        return selfconv, (math.log(scaled) + top if scaled > 0 else -math.inf)
    return selfconv, scaled * math.exp(top)
