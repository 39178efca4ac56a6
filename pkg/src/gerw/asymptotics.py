"""Asymptotic equivalence classes of positive sequences.

A :class:`Form` stands for the asymptotic shape

    coef * n**p * exp(c * (log n)**gamma) * (log n)**s * (log log n)**t

with ``0 < gamma < 1`` whenever ``c != 0``.  Every sequence the walk's
parameter families produce (a_n, 1/a_n**2, the summands of w_n, v_n, r_n
and their partial or tail sums) lives in this class, so convergence and
growth questions reduce to comparing exponents instead of summing series.

Constants the theory leaves implicit (the C_* of the slowly varying part,
the limit of a convergent series) are carried as named symbols with integer
powers; they cancel in ratios such as r_n = a_n * sum(.../a_k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

__all__ = ["Form", "Summation", "sum_form", "ratio_limit", "TOL"]

TOL = 1e-12


def _sign(x: float) -> int:
    if x > TOL:
        return 1
    if x < -TOL:
        return -1
    return 0


def _clean(x: float) -> float:
    return 0.0 if abs(x) <= TOL else x


def _merge_unknown(a: tuple, b: tuple, scale_b: int = 1) -> tuple:
    powers: dict[str, int] = dict(a)
    for name, k in b:
        powers[name] = powers.get(name, 0) + scale_b * k
    return tuple(sorted((k, v) for k, v in powers.items() if v != 0))


@dataclass(frozen=True)
class Form:
    coef: float = 1.0
    p: float = 0.0
    c: float = 0.0
    gamma: float = 0.0
    s: float = 0.0
    t: float = 0.0
    unknown: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.coef > 0:
            raise ValueError(f"Form coefficient must be positive, got {self.coef}")
        if _sign(self.c) != 0 and not 0 < self.gamma < 1:
            raise ValueError("exp(c (log n)^gamma) needs 0 < gamma < 1")

    # -- algebra -------------------------------------------------------
    def _gamma_with(self, other: "Form") -> float:
        if _sign(self.c) == 0:
            return other.gamma
        if _sign(other.c) == 0 or abs(self.gamma - other.gamma) <= TOL:
            return self.gamma
        raise ValueError("cannot combine exp terms with different gamma")

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return replace(self, coef=self.coef * other)
        gamma = self._gamma_with(other)
        c = _clean(self.c + other.c)
        return Form(
            coef=self.coef * other.coef,
            p=_clean(self.p + other.p),
            c=c,
            gamma=gamma if c != 0 else 0.0,
            s=_clean(self.s + other.s),
            t=_clean(self.t + other.t),
            unknown=_merge_unknown(self.unknown, other.unknown),
        )

    __rmul__ = __mul__

    def __pow__(self, k: float) -> "Form":
        c = _clean(self.c * k)
        unknown = self.unknown
        if unknown:
            scaled = [(n, e * k) for n, e in unknown]
            if all(float(e).is_integer() for _, e in scaled):
                unknown = tuple((n, int(e)) for n, e in scaled)
            else:
                # fractional powers of symbols are folded into a fresh symbol
                unknown = (("(" + "*".join(f"{n}^{e}" for n, e in unknown) + f")^{k:g}", 1),)
        return Form(
            coef=self.coef ** k,
            p=_clean(self.p * k),
            c=c,
            gamma=self.gamma if c != 0 else 0.0,
            s=_clean(self.s * k),
            t=_clean(self.t * k),
            unknown=unknown,
        )

    def inverse(self) -> "Form":
        return self ** -1

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return replace(self, coef=self.coef / other)
        return self * other.inverse()

    # -- inspection ----------------------------------------------------
    @property
    def constant_known(self) -> bool:
        return not self.unknown

    @property
    def index(self) -> float:
        """Regular-variation index (the power of n)."""
        return self.p

    def shape(self) -> "Form":
        """Same shape with unit coefficient and no symbolic constants."""
        return Form(p=self.p, c=self.c, gamma=self.gamma, s=self.s, t=self.t)

    def is_constant(self) -> bool:
        return all(_sign(v) == 0 for v in (self.p, self.c, self.s, self.t))

    def evaluate(self, n, with_coef: bool = False):
        """Numeric value of the shape at n (n > e so log log n > 0)."""
        import numpy as np

        n = np.asarray(n, dtype=float)
        logn = np.log(n)
        out = self.p * logn
        if self.c:
            out = out + self.c * logn ** self.gamma
        if self.s:
            out = out + self.s * np.log(logn)
        if self.t:
            out = out + self.t * np.log(np.log(logn))
        val = np.exp(out)
        if with_coef:
            val = val * self.coef
        return val

    def tag(self) -> str:
        parts = []
        if _sign(self.p):
            parts.append("n" if self.p == 1 else f"n^{self.p:g}")
        if _sign(self.c):
            parts.append(f"exp({self.c:g}*(log n)^{self.gamma:g})")
        if _sign(self.s):
            parts.append("log n" if self.s == 1 else f"(log n)^{self.s:g}")
        if _sign(self.t):
            parts.append("log log n" if self.t == 1 else f"(log log n)^{self.t:g}")
        return " ".join(parts) if parts else "1"

    def constant_tag(self) -> str:
        if not self.unknown:
            return f"{self.coef:.12g}"
        sym = "*".join(n if e == 1 else f"{n}^{e}" for n, e in self.unknown)
        return f"{self.coef:.12g}*{sym}"

    def __str__(self) -> str:
        return f"{self.constant_tag()} * {self.tag()}"


@dataclass(frozen=True)
class Summation:
    """Outcome of summing a Form over k: divergent partial sums or a convergent tail."""

    diverges: bool
    partial: Optional[Form]  # partial-sum asymptote (None: no closed form)
    tail: Optional[Form]  # tail-sum asymptote when convergent


def sum_form(x: Optional[Form], name: str = "sum") -> Summation:
    """Asymptotics of sum_{k<=n} x_k, or of sum_{k>=n} x_k when that converges.

    ``None`` stands for an (eventually) identically zero sequence.  Symbol
    ``name`` names the limit of a convergent series.
    """
    if x is None:
        return Summation(False, None, None)
    limit = Form(unknown=((name, 1),))
    ps = _sign(x.p + 1)
    if ps > 0:
        f = replace(x, p=_clean(x.p + 1), coef=x.coef / (x.p + 1))
        return Summation(True, f, None)
    if ps < 0:
        f = replace(x, p=_clean(x.p + 1), coef=x.coef / (-x.p - 1))
        return Summation(False, limit, f)
    # borderline n^-1: exp term decides, then log powers, then log log powers
    cs = _sign(x.c)
    if cs != 0:
        rate = abs(x.c) * x.gamma
        f = replace(x, p=0.0, s=_clean(x.s + 1 - x.gamma), coef=x.coef / rate)
        return Summation(True, f, None) if cs > 0 else Summation(False, limit, f)
    ss = _sign(x.s + 1)
    if ss > 0:
        return Summation(True, replace(x, p=0.0, s=_clean(x.s + 1), coef=x.coef / (x.s + 1)), None)
    if ss < 0:
        return Summation(False, limit, replace(x, p=0.0, s=_clean(x.s + 1), coef=x.coef / (-x.s - 1)))
    ts = _sign(x.t + 1)
    if ts > 0:
        return Summation(True, replace(x, p=0.0, s=0.0, t=_clean(x.t + 1), coef=x.coef / (x.t + 1)), None)
    if ts < 0:
        return Summation(False, limit, replace(x, p=0.0, s=0.0, t=_clean(x.t + 1), coef=x.coef / (-x.t - 1)))
    # 1/(n log n log log n): diverges like log log log n, outside the class
    return Summation(True, None, None)


def ratio_limit(x: Optional[Form], y: Optional[Form]):
    """lim x_n / y_n as 0.0, math.inf, or a Form with all exponents zero."""
    if x is None:
        return 0.0
    if y is None:
        return math.inf
    d = x / y
    for v in (d.p, d.c, d.s, d.t):
        sg = _sign(v)
        if sg > 0:
            return math.inf
        if sg < 0:
            return 0.0
    return d


def limit_value(lim) -> Optional[float]:
    """Numeric value of a ratio_limit result, None when it carries symbols."""
    if isinstance(lim, float):
        return lim
    return lim.coef if lim.constant_known else None
