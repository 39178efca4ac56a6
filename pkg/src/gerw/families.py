"""Memory sequences {alpha_n} and drift sequences {eps_n}.

Families are small frozen dataclasses.  Log-corrected families are only
defined for n >= 2; at n = 1 they take their limit value.  Raw values that
leave [0, 1] (large kappa at small n) are clamped and the clamp is recorded
in :class:`Evaluated`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import ClassVar, Optional, Union

import numpy as np

from .asymptotics import Form, sum_form

__all__ = [
    "Constant",
    "Table",
    "LogCorrected",
    "ApproachOne",
    "PowerLaw",
    "LogOverPower",
    "InverseLogPower",
    "OneMinusPowerLaw",
    "OneMinusLogOverPower",
    "OneMinusInverseLogPower",
    "Evaluated",
    "FamilyMetadata",
    "alpha_values",
    "eps_values",
    "eval_alpha",
    "eval_eps",
    "family_metadata",
    "family_from_dict",
]


class _Family:
    kind: ClassVar[str]
    roles: ClassVar[tuple] = ("alpha", "eps")

    def raw(self, n: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def limit(self) -> Optional[float]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        d.update(asdict(self))
        return d

    def describe(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in asdict(self).items())
        return f"{type(self).__name__}({args})"


def _check_unit(name, v):
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {v}")


def _logn(n: np.ndarray) -> np.ndarray:
    # log n with n = 1 mapped to nan; callers patch n = 1 separately
    with np.errstate(divide="ignore"):
        out = np.log(n.astype(float))
    out[n == 1] = np.nan
    return out


@dataclass(frozen=True)
class Constant(_Family):
    value: float
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        _check_unit("value", self.value)

    def raw(self, n):
        return np.full(n.shape, float(self.value))

    def limit(self):
        return float(self.value)


@dataclass(frozen=True)
class Table(_Family):
    values: tuple
    kind: ClassVar[str] = "table"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("table must be nonempty")
        for v in self.values:
            _check_unit("table value", v)

    def raw(self, n):
        if n.size and n.max() > len(self.values):
            raise IndexError(f"table has {len(self.values)} entries, n = {int(n.max())} requested")
        return np.asarray(self.values)[n - 1]

    def limit(self):
        return None

    def to_dict(self):
        return {"kind": self.kind, "values": list(self.values)}


@dataclass(frozen=True)
class LogCorrected(_Family):
    """alpha_n = alpha + kappa / (log n)**theta."""

    alpha: float
    kappa: float
    theta: float
    kind: ClassVar[str] = "log_corrected"
    roles: ClassVar[tuple] = ("alpha",)

    def __post_init__(self):
        _check_unit("alpha", self.alpha)
        if not self.theta > 0:
            raise ValueError("theta must be positive")

    def raw(self, n):
        out = self.alpha + self.kappa / _logn(n) ** self.theta
        out[n == 1] = self.alpha
        return out

    def limit(self):
        return float(self.alpha)


@dataclass(frozen=True)
class ApproachOne(_Family):
    """alpha_n = 1 - kappa / (log n)**theta."""

    kappa: float
    theta: float
    kind: ClassVar[str] = "approach_one"
    roles: ClassVar[tuple] = ("alpha",)

    def __post_init__(self):
        if not (self.kappa > 0 and self.theta > 0):
            raise ValueError("kappa and theta must be positive")

    def raw(self, n):
        out = 1.0 - self.kappa / _logn(n) ** self.theta
        out[n == 1] = 1.0
        return out

    def limit(self):
        return 1.0


@dataclass(frozen=True)
class PowerLaw(_Family):
    """eps_n = n**-rho."""

    rho: float
    kind: ClassVar[str] = "power_law"
    roles: ClassVar[tuple] = ("eps",)

    def __post_init__(self):
        if not self.rho >= 0:
            raise ValueError("rho must be nonnegative")

    def raw(self, n):
        return n.astype(float) ** -self.rho

    def limit(self):
        return 1.0 if self.rho == 0 else 0.0


@dataclass(frozen=True)
class LogOverPower(_Family):
    """eps_n = (log n)**(eta - 1) / n**beta."""

    eta: float
    beta: float
    kind: ClassVar[str] = "log_over_power"
    roles: ClassVar[tuple] = ("eps",)

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")

    def raw(self, n):
        out = _logn(n) ** (self.eta - 1) / n.astype(float) ** self.beta
        out[n == 1] = 0.0
        return out

    def limit(self):
        return 0.0


@dataclass(frozen=True)
class InverseLogPower(_Family):
    """eps_n = 1 / (log n)**eta."""

    eta: float
    kind: ClassVar[str] = "inverse_log_power"
    roles: ClassVar[tuple] = ("eps",)

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    def raw(self, n):
        out = _logn(n) ** -self.eta
        out[n == 1] = 0.0
        return out

    def limit(self):
        return 0.0


@dataclass(frozen=True)
class OneMinusPowerLaw(_Family):
    """eps_n = 1 - n**-rho."""

    rho: float
    kind: ClassVar[str] = "one_minus_power_law"
    roles: ClassVar[tuple] = ("eps",)

    def __post_init__(self):
        if not self.rho >= 0:
            raise ValueError("rho must be nonnegative")

    def raw(self, n):
        return 1.0 - n.astype(float) ** -self.rho

    def limit(self):
        return 0.0 if self.rho == 0 else 1.0


@dataclass(frozen=True)
class OneMinusLogOverPower(_Family):
    """eps_n = 1 - (log n)**(eta - 1) / n**beta."""

    eta: float
    beta: float
    kind: ClassVar[str] = "one_minus_log_over_power"
    roles: ClassVar[tuple] = ("eps",)

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")

    def raw(self, n):
        out = 1.0 - _logn(n) ** (self.eta - 1) / n.astype(float) ** self.beta
        out[n == 1] = 1.0
        return out

    def limit(self):
        return 1.0


@dataclass(frozen=True)
class OneMinusInverseLogPower(_Family):
    """eps_n = 1 - 1 / (log n)**eta."""

    eta: float
    kind: ClassVar[str] = "one_minus_inverse_log_power"
    roles: ClassVar[tuple] = ("eps",)

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    def raw(self, n):
        out = 1.0 - _logn(n) ** -self.eta
        out[n == 1] = 1.0
        return out

    def limit(self):
        return 1.0


AlphaFamily = Union[Constant, LogCorrected, ApproachOne, Table]
EpsFamily = Union[
    Constant,
    PowerLaw,
    LogOverPower,
    InverseLogPower,
    OneMinusPowerLaw,
    OneMinusLogOverPower,
    OneMinusInverseLogPower,
    Table,
]

_KINDS = {
    cls.kind: cls
    for cls in (
        Constant,
        Table,
        LogCorrected,
        ApproachOne,
        PowerLaw,
        LogOverPower,
        InverseLogPower,
        OneMinusPowerLaw,
        OneMinusLogOverPower,
        OneMinusInverseLogPower,
    )
}


def family_from_dict(d: dict, role: str = "alpha"):
    """Build a family from its tagged-table form, e.g. {"kind": "constant", "value": 0.3}."""
    d = dict(d)
    kind = d.pop("kind", None)
    cls = _KINDS.get(kind)
    if cls is None:
        raise ValueError(f"unknown family kind {kind!r}")
    if role not in cls.roles:
        raise ValueError(f"family kind {kind!r} cannot serve as {role}")
    return cls(**d)


@dataclass(frozen=True)
class Evaluated:
    """Family values for n = 1..N with the clamp record."""

    values: np.ndarray
    first_clamp: Optional[int] = None
    last_clamp: Optional[int] = None
    n_clamped: int = 0


def _evaluate(family, N: int, role: str) -> Evaluated:
    if role not in family.roles:
        raise TypeError(f"{type(family).__name__} is not a valid {role} family")
    if N < 1:
        raise ValueError("N must be >= 1")
    n = np.arange(1, N + 1)
    raw = family.raw(n)
    bad = np.flatnonzero((raw < 0.0) | (raw > 1.0))
    vals = np.clip(raw, 0.0, 1.0)
    if bad.size:
        return Evaluated(vals, int(bad[0]) + 1, int(bad[-1]) + 1, int(bad.size))
    return Evaluated(vals)


def alpha_values(family, N: int) -> Evaluated:
    return _evaluate(family, N, "alpha")


def eps_values(family, N: int) -> Evaluated:
    return _evaluate(family, N, "eps")


def _eval_one(family, n: int, role: str) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    if role not in family.roles:
        raise TypeError(f"{type(family).__name__} is not a valid {role} family")
    raw = family.raw(np.array([n]))
    return float(np.clip(raw[0], 0.0, 1.0))


def eval_alpha(family, n: int) -> float:
    return _eval_one(family, n, "alpha")


def eval_eps(family, n: int) -> float:
    return _eval_one(family, n, "eps")


# ---------------------------------------------------------------------------
# metadata
# ---------------------------------------------------------------------------

N_FORM = Form(p=1.0)


def _alpha_params(family):
    """(alpha, kappa, theta) with alpha_n ~ alpha + kappa/(log n)^theta, or None for tables."""
    if isinstance(family, Constant):
        return float(family.value), 0.0, 1.0
    if isinstance(family, LogCorrected):
        a, k = float(family.alpha), float(family.kappa)
        # correction pushing out of [0, 1] is clamped away for every n
        if (a == 1.0 and k > 0) or (a == 0.0 and k < 0):
            k = 0.0
        return a, k, float(family.theta)
    if isinstance(family, ApproachOne):
        return 1.0, -float(family.kappa), float(family.theta)
    return None


def _slow_part(kappa: float, theta: float) -> Form:
    """exp(sum kappa/(k (log k)^theta)) as a Form."""
    if kappa == 0 or theta > 1:
        return Form()
    if theta == 1:
        return Form(s=kappa)
    return Form(c=kappa / (1 - theta), gamma=1 - theta)


def a_form(family) -> Optional[Form]:
    """Asymptote of a_n = prod (1 + alpha_k/k)."""
    params = _alpha_params(family)
    if params is None:
        return None
    alpha, kappa, theta = params
    if kappa == 0:
        return Form(coef=1.0 / math.gamma(alpha + 1), p=alpha)
    return Form(p=alpha, unknown=(("Ka", 1),)) * _slow_part(kappa, theta)


def one_minus_alpha_form(family) -> Optional[Form]:
    params = _alpha_params(family)
    if params is None:
        return None
    alpha, kappa, theta = params
    if alpha < 1:
        return Form(coef=1 - alpha)
    if kappa == 0:
        return None  # identically zero
    return Form(coef=-kappa, s=-theta)


def eps_forms(family):
    """(eps_n form, (1 - eps_n) form); None means identically zero."""
    if isinstance(family, Constant):
        e = float(family.value)
        return (Form(coef=e) if e > 0 else None), (Form(coef=1 - e) if e < 1 else None)
    if isinstance(family, PowerLaw):
        if family.rho == 0:
            return Form(), None
        return Form(p=-family.rho), Form()
    if isinstance(family, LogOverPower):
        return Form(p=-family.beta, s=family.eta - 1), Form()
    if isinstance(family, InverseLogPower):
        return Form(s=-family.eta), Form()
    if isinstance(family, OneMinusPowerLaw):
        if family.rho == 0:
            return None, Form()
        return Form(), Form(p=-family.rho)
    if isinstance(family, OneMinusLogOverPower):
        return Form(), Form(p=-family.beta, s=family.eta - 1)
    if isinstance(family, OneMinusInverseLogPower):
        return Form(), Form(s=-family.eta)
    raise TypeError(f"no asymptotic form for {type(family).__name__}")


@dataclass(frozen=True)
class FamilyMetadata:
    """Limits, regular-variation indices and divergence facts of a family pair.

    Tri-state flags: True / False, or None when undecidable (tables).
    """

    alpha_limit: Optional[float]
    eps_limit: Optional[float]
    eps_index: Optional[float]
    one_minus_eps_index: Optional[float]
    sum_one_minus_alpha_over_n_diverges: Optional[bool]
    sum_inv_a2_diverges: Optional[bool]
    sum_one_minus_eps_over_a2_diverges: Optional[bool]
    decidable: bool
    a: Optional[Form] = field(default=None, repr=False)
    eps: Optional[Form] = field(default=None, repr=False)
    one_minus_eps: Optional[Form] = field(default=None, repr=False)
    one_minus_alpha: Optional[Form] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "alpha_limit": self.alpha_limit,
            "eps_limit": self.eps_limit,
            "eps_index": self.eps_index,
            "one_minus_eps_index": self.one_minus_eps_index,
            "sum_one_minus_alpha_over_n_diverges": self.sum_one_minus_alpha_over_n_diverges,
            "sum_inv_a2_diverges": self.sum_inv_a2_diverges,
            "sum_one_minus_eps_over_a2_diverges": self.sum_one_minus_eps_over_a2_diverges,
            "decidable": self.decidable,
        }


def family_metadata(alpha, eps) -> FamilyMetadata:
    if isinstance(alpha, Table) or isinstance(eps, Table):
        return FamilyMetadata(
            alpha_limit=alpha.limit(),
            eps_limit=eps.limit(),
            eps_index=None,
            one_minus_eps_index=None,
            sum_one_minus_alpha_over_n_diverges=None,
            sum_inv_a2_diverges=None,
            sum_one_minus_eps_over_a2_diverges=None,
            decidable=False,
        )
    a = a_form(alpha)
    oma = one_minus_alpha_form(alpha)
    ef, omef = eps_forms(eps)
    inv_a2 = a ** -2
    return FamilyMetadata(
        alpha_limit=alpha.limit(),
        eps_limit=eps.limit(),
        eps_index=None if ef is None else ef.p,
        one_minus_eps_index=None if omef is None else omef.p,
        sum_one_minus_alpha_over_n_diverges=sum_form(None if oma is None else oma / N_FORM).diverges,
        sum_inv_a2_diverges=sum_form(inv_a2).diverges,
        sum_one_minus_eps_over_a2_diverges=sum_form(None if omef is None else omef * inv_a2).diverges,
        decidable=True,
        a=a,
        eps=ef,
        one_minus_eps=omef,
        one_minus_alpha=oma,
    )
