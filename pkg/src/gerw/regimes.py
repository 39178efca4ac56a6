"""Regime classification: which limit law governs S_n for a pair of families.

The classifier first gathers facts (limits, divergence of the relevant
series, asymptotic ratios) into a trace, then decides the growth law and the
fluctuation law from the trace alone.  Every fact is computed from the
asymptotic forms of the families, never from numeric partial sums.

Growth laws
    Constant      S_n / r_n -> 1 (a.s. and/or in L2), r_n ~ value * form(n)
    Normal(mu,1)  S_n / (a_n sqrt(w_n)) -> N(mu, 1)
    RandomDrift   S_n / a_n -> M_inf + c_*
    Unclassified

Fluctuation laws (centred at E[S_n])
    clt_mean              N(0, 1 - eps^2) at a_n sqrt(w_n)
    clt_degenerate        N(0, c_{alpha,rho}) at a_n sqrt(v_n)
    drift_clt             N(0, 1 - eps^2) around a_n M_inf at a_n sqrt(z_n)
    drift_clt_degenerate  N(0, c_{alpha,rho}) around a_n M_inf at a_n sqrt(t_n)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import families as fam
from .asymptotics import Form, limit_value, ratio_limit, sum_form

__all__ = [
    "RegimeReport",
    "c_alpha_rho",
    "mu_limit",
    "classify",
    "decide",
    "gather_facts",
    "phase_diagram",
    "write_phase_csv",
    "estimate_c_star",
    "LABELS",
]

LABELS = ("Constant", "Normal(0,1)", "Normal(mu,1)", "RandomDrift", "Unclassified")
_TOL = 1e-12


def c_alpha_rho(alpha: float, rho: float) -> float:
    """(1 - alpha)(1 - rho) / (1 - (alpha + rho)), defined for alpha + rho < 1."""
    if not alpha + rho < 1:
        raise ValueError(f"c_alpha_rho needs alpha + rho < 1, got {alpha} + {rho}")
    return (1.0 - alpha) * (1.0 - rho) / (1.0 - (alpha + rho))


def _is(x, v):
    return x is not None and abs(x - v) <= _TOL


# ---------------------------------------------------------------------------
# facts
# ---------------------------------------------------------------------------


@dataclass
class _Facts:
    values: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)
    forms: dict = field(default_factory=dict)

    def put(self, name, value, source):
        self.values[name] = value
        self.sources[name] = source

    def trace(self) -> list:
        return [{"condition": k, "value": _jsonable(v), "decided_by": self.sources[k]} for k, v in self.values.items()]


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def _mu_from_forms(meta) -> object:
    """(1 - alpha)/sqrt(w_n) * sum_{k<=n} eps_k / a_k in the limit: float, math.inf, or None (unknown)."""
    sw = sum_form(meta.a ** -2, name="w_inf")
    if not sw.diverges:
        return None
    if meta.eps is None:
        return 0.0
    if sw.partial is None:
        return None
    se = sum_form(meta.eps / meta.a, name="se_inf")
    if not se.diverges:
        return 0.0
    if se.partial is None:
        return None
    lim = ratio_limit(se.partial * (1.0 - meta.alpha_limit), sw.partial ** 0.5)
    return limit_value(lim)


def gather_facts(alpha, eps) -> _Facts:
    """Every condition the decision ladder consults, with the fact that decided it."""
    meta = fam.family_metadata(alpha, eps)
    f = _Facts()
    f.put("decidable", meta.decidable, "family variant (tables are undecidable)")
    if not meta.decidable:
        return f
    A, E = meta.alpha_limit, meta.eps_limit
    f.put("alpha_limit", A, "family metadata")
    f.put("eps_limit", E, "family metadata")
    f.put("sum_one_minus_alpha_over_n_diverges", meta.sum_one_minus_alpha_over_n_diverges, "family metadata")
    f.put("sum_inv_a2_diverges", meta.sum_inv_a2_diverges, "family metadata")
    f.put("sum_one_minus_eps_over_a2_diverges", meta.sum_one_minus_eps_over_a2_diverges, "family metadata")
    f.put("linear_law_holds", A < 1 or bool(meta.sum_one_minus_alpha_over_n_diverges),
          "alpha < 1 or sum (1 - alpha_n)/n diverges, so S_n/n -> eps")

    a = meta.a
    inv_a2 = a ** -2
    f.forms["a"] = a

    # r_n = a_n * sum (1 - alpha_k) eps_k / a_k
    xr = None if (meta.one_minus_alpha is None or meta.eps is None) else meta.one_minus_alpha * meta.eps / a
    sr = sum_form(xr, name="sr_inf")
    r_summable = not sr.diverges
    f.put("sum_r_summand_finite", r_summable, "form algebra on (1 - alpha_n) eps_n / a_n")
    r_form = None
    if sr.diverges and sr.partial is not None:
        r_form = a * sr.partial
    f.forms["r"] = r_form
    a_over_r_to_zero = sr.diverges and sr.partial is not None
    f.put("a_over_r_to_zero", a_over_r_to_zero, "r_n / a_n is the partial sum above")
    if r_form is not None:
        inv_r2_finite = not sum_form(r_form ** -2).diverges
        f.put("sum_inv_r2_finite", inv_r2_finite, "form algebra on 1/r_n^2")
    else:
        f.put("sum_inv_r2_finite", None, "r_n has no closed form")

    sw = sum_form(inv_a2, name="w_inf")
    aw_form = a * sw.partial ** 0.5 if (sw.diverges and sw.partial is not None) else None
    f.forms["a_sqrt_w"] = aw_form if aw_form is not None else (a if not sw.diverges else None)
    if r_form is not None:
        if sw.diverges:
            lim = ratio_limit(aw_form, r_form) if aw_form is not None else None
            f.put("a_sqrt_w_over_r_to_zero", lim == 0.0, "form algebra on a_n sqrt(w_n) / r_n")
        else:
            f.put("a_sqrt_w_over_r_to_zero", True, "w_n converges, so this is a_n / r_n")
        f.put("r_constant", limit_value(ratio_limit(r_form, r_form.shape())) if r_form.constant_known else None,
              "leading coefficient of r_n")

    mu = _mu_from_forms(meta)
    f.put("mu", mu, "form algebra on (1 - alpha) sum(eps_k / a_k) / sqrt(w_n)")

    # degenerate-drift hypotheses
    rv = meta.one_minus_eps is not None and _is(E, 1.0)
    rho = -meta.one_minus_eps_index if rv else None
    f.put("one_minus_eps_regularly_varying", rv, "family variant: 1 - eps_n nonzero with a power-law index")
    f.put("rho", rho, "regular-variation index of 1 - eps_n")
    f.put("rho_lt_half", None if rho is None else rho < 0.5 - _TOL, "rho < 1/2")
    f.put("alpha_plus_rho_lt_1", None if rho is None else A + rho < 1 - _TOL, "alpha + rho < 1")
    f.put("degenerate_assumption", bool(rv and meta.sum_inv_a2_diverges and rho < 0.5 - _TOL),
          "eps = 1, sum 1/a^2 diverges, 1 - eps_n regularly varying with rho < 1/2")

    # scale forms for the fluctuation laws
    if meta.one_minus_eps is not None:
        v_summand = meta.one_minus_eps * inv_a2 * (1.0 + E)
        sv = sum_form(v_summand, name="v_inf")
        if sv.diverges and sv.partial is not None:
            f.forms["a_sqrt_v"] = a * sv.partial ** 0.5
        if not sv.diverges:
            f.forms["a_sqrt_t"] = a * sv.tail ** 0.5
    if not sw.diverges:
        f.forms["a_sqrt_z"] = a * sw.tail ** 0.5
    return f


# ---------------------------------------------------------------------------
# decision
# ---------------------------------------------------------------------------


def decide(values: dict) -> tuple:
    """(growth law dict, fluctuation dict, modes) as a pure function of the trace values."""
    if not values.get("decidable"):
        unc = {"kind": "Unclassified", "reason": "divergence conditions undecidable for table families"}
        return unc, {"kind": "Unclassified", "reason": unc["reason"]}, []

    A, E = values["alpha_limit"], values["eps_limit"]
    w_div = values["sum_inv_a2_diverges"]
    ome_div = values["sum_one_minus_eps_over_a2_diverges"]
    linear = values["linear_law_holds"]
    mu = values["mu"]

    # growth law
    modes = []
    if values["a_over_r_to_zero"]:
        if values["sum_inv_r2_finite"]:
            modes.append("a.s.")
        if values["a_sqrt_w_over_r_to_zero"]:
            modes.append("L2")
    if modes:
        law = {"kind": "Constant", "value": values.get("r_constant"), "scaling": "r_n"}
    elif _is(E, 0.0) and w_div and mu is not None and math.isfinite(mu):
        law = {"kind": "Normal", "mean": mu, "variance": 1.0, "scaling": "a_n*sqrt(w_n)"}
        modes = ["distribution"]
    elif values["sum_r_summand_finite"] and (not w_div or (values["degenerate_assumption"] and ome_div is False)):
        law = {"kind": "RandomDrift", "scaling": "a_n"}
        modes = ["a.s.", "L2"]
    else:
        reason = "no growth result applies"
        if _is(E, 0.0) and w_div and mu is None:
            reason = "mu limit undecidable in closed form"
        law = {"kind": "Unclassified", "reason": reason}

    # fluctuation law
    rho = values["rho"]
    if E < 1 - _TOL and w_div:
        fl = {"kind": "clt_mean", "variance": 1.0 - E * E, "scaling": "a_n*sqrt(w_n)",
              "lil": math.sqrt(1.0 - E * E), "envelope": "phi(w_n)"}
    elif E < 1 - _TOL and not w_div:
        if linear:
            fl = {"kind": "drift_clt", "variance": 1.0 - E * E, "scaling": "a_n*sqrt(z_n)",
                  "lil": math.sqrt(1.0 - E * E), "envelope": "psi(z_n)"}
        else:
            fl = {"kind": "Unclassified", "reason": "alpha = 1 with summable (1 - alpha_n)/n: no fluctuation result"}
    elif not values["one_minus_eps_regularly_varying"]:
        fl = {"kind": "Unclassified", "reason": "eps_n = 1 identically: 1 - eps_n is not regularly varying"}
    elif w_div:
        if not values["rho_lt_half"]:
            fl = {"kind": "Unclassified", "reason": "rho >= 1/2 with divergent sum 1/a^2 is an open case"}
        else:
            c = c_alpha_rho(A, rho)
            if ome_div:
                fl = {"kind": "clt_degenerate", "variance": c, "scaling": "a_n*sqrt(v_n)",
                      "lil": math.sqrt(c), "envelope": "phi(v_n)"}
            else:
                fl = {"kind": "drift_clt_degenerate", "variance": c, "scaling": "a_n*sqrt(t_n)",
                      "lil": math.sqrt(c), "envelope": "psi(t_n)"}
    elif not linear:
        fl = {"kind": "Unclassified", "reason": "alpha = 1 with summable (1 - alpha_n)/n: no fluctuation result"}
    elif not values["alpha_plus_rho_lt_1"]:
        fl = {"kind": "Unclassified", "reason": "alpha + rho >= 1: c_{alpha,rho} undefined"}
    else:
        c = c_alpha_rho(A, rho)
        fl = {"kind": "drift_clt_degenerate", "variance": c, "scaling": "a_n*sqrt(t_n)",
              "lil": math.sqrt(c), "envelope": "psi(t_n)"}
    return law, fl, modes


def _gate(fl) -> Optional[str]:
    return {"clt_mean": "clt", "clt_degenerate": "clt", "drift_clt": "drift_fluctuation",
            "drift_clt_degenerate": "drift_fluctuation"}.get(fl["kind"])


def _label(law) -> str:
    k = law["kind"]
    if k == "Normal":
        return "Normal(0,1)" if law["mean"] == 0 else "Normal(mu,1)"
    return k


@dataclass(frozen=True)
class RegimeReport:
    law: dict
    fluctuation: dict
    modes: list
    trace: list
    constants: dict
    scaling: dict
    results: list
    verification: Optional[str]

    @property
    def label(self) -> str:
        return _label(self.law)

    def cell_label(self) -> str:
        """Phase-diagram label; Normal laws carry their mean."""
        if self.law["kind"] == "Normal":
            return f"Normal({self.law['mean']:.10g},1)"
        return self.law["kind"]

    def to_dict(self) -> dict:
        return {
            "law": self.law,
            "label": self.label,
            "scaling": self.scaling,
            "fluctuation": self.fluctuation,
            "modes": list(self.modes),
            "results": self.results,
            "verification": self.verification,
            "constants": self.constants,
            "trace": self.trace,
        }


def _form_dict(form: Optional[Form]):
    if form is None:
        return None
    return {"form": form.tag(), "constant": form.coef if form.constant_known else None, "constant_expr": form.constant_tag()}


def classify(alpha, eps, q: float = 0.5) -> RegimeReport:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    facts = gather_facts(alpha, eps)
    law, fl, modes = decide(facts.values)
    constants = {"q": q}
    v = facts.values
    if v.get("decidable"):
        constants["alpha"] = v["alpha_limit"]
        constants["eps"] = v["eps_limit"]
        if v["rho"] is not None:
            constants["rho"] = v["rho"]
            if v["alpha_plus_rho_lt_1"]:
                constants["c_alpha_rho"] = c_alpha_rho(v["alpha_limit"], v["rho"])
        mu = v["mu"]
        constants["mu"] = "infinite" if mu == math.inf else ("nonexistent" if mu is None else mu)
    if law["kind"] == "RandomDrift":
        # with no drift terms the sum defining c_* vanishes
        constants["c_star"] = 2 * q - 1 if _no_drift(alpha, eps) else "estimate numerically"
    if "variance" in fl:
        constants["fluctuation_variance"] = fl["variance"]
        constants["lil_constant"] = fl["lil"]

    scale_key = {"r_n": "r", "a_n*sqrt(w_n)": "a_sqrt_w", "a_n": "a"}.get(law.get("scaling"))
    fl_key = {"a_n*sqrt(w_n)": "a_sqrt_w", "a_n*sqrt(v_n)": "a_sqrt_v", "a_n*sqrt(z_n)": "a_sqrt_z",
              "a_n*sqrt(t_n)": "a_sqrt_t"}.get(fl.get("scaling"))
    scaling = {
        "law": law.get("scaling"),
        "law_asymptote": _form_dict(facts.forms.get(scale_key)) if scale_key else None,
        "fluctuation": fl.get("scaling"),
        "fluctuation_asymptote": _form_dict(facts.forms.get(fl_key)) if fl_key else None,
    }
    results = []
    if law["kind"] == "Constant":
        if "a.s." in modes:
            results.append({"result": "lln_r", "primary": False})
        if "L2" in modes:
            results.append({"result": "l2_r", "primary": False})
    elif law["kind"] == "Normal":
        results.append({"result": "normal_mu", "primary": False})
    elif law["kind"] == "RandomDrift":
        results.append({"result": "random_drift", "primary": False})
    if _gate(fl):
        results.append({"result": fl["kind"], "primary": True})
    elif results:
        results[0]["primary"] = True
    return RegimeReport(law=law, fluctuation=fl, modes=modes, trace=facts.trace(), constants=constants,
                        scaling=scaling, results=results, verification=_gate(fl))


def _no_drift(alpha, eps) -> bool:
    meta = fam.family_metadata(alpha, eps)
    return meta.one_minus_alpha is None or meta.eps is None


def estimate_c_star(alpha, eps, q: float, N: int = 10**6) -> tuple:
    """c_* = lim E[S_n]/a_n = 2q - 1 + sum (1 - alpha_k) eps_k / a_{k+1}: (estimate, stabilization error)."""
    from .moments import exact_mean
    from .scaling import build_table

    table = build_table(alpha, eps, N, cutoff=N)
    ratio = exact_mean(alpha, eps, q, N) / table.a
    return float(ratio[-1]), float(abs(ratio[-1] - ratio[N // 2 - 1]))


def mu_limit(alpha, eps, N: int = 10**6):
    """lim (1 - alpha)/sqrt(w_n) sum_{k<=n} eps_k / a_k.

    Returns a float, "infinite", or "nonexistent" (w_n convergent, or no
    stabilized limit).  Closed forms decide when available; otherwise the
    ratio is evaluated at n and n/2 and accepted when the two agree to 1%.
    """
    meta = fam.family_metadata(alpha, eps)
    if meta.decidable:
        if meta.sum_inv_a2_diverges is False:
            return "nonexistent"
        mu = _mu_from_forms(meta)
        if mu == math.inf:
            return "infinite"
        if mu is not None:
            return mu
    from .scaling import build_table

    if isinstance(alpha, fam.Table):
        N = min(N, len(alpha.values))
    if isinstance(eps, fam.Table):
        N = min(N, len(eps.values))
    table = build_table(alpha, eps, N, cutoff=N)
    se = np.cumsum(table.eps_n * np.exp(-table.log_a))
    ratio = (1.0 - table.alpha_n[-1]) * se / np.sqrt(table.w)
    a, b = ratio[-1], ratio[N // 2 - 1]
    if abs(a - b) <= 0.01 * max(abs(a), 1e-12):
        return float(a)
    return "nonexistent"


# ---------------------------------------------------------------------------
# phase diagrams
# ---------------------------------------------------------------------------


def phase_diagram(theta: float, alpha: float, kappa_grid: Sequence[float], eta_grid: Sequence[float]) -> list:
    """Rows (kappa, eta, label) for alpha_n = alpha + kappa/(log n)^theta, eps_n = (log n)^(eta-1)/n^(1-alpha)."""
    kappa_grid, eta_grid = list(kappa_grid), list(eta_grid)
    if not kappa_grid or not eta_grid:
        raise ValueError("empty grid")
    rows = []
    for k in kappa_grid:
        for e in eta_grid:
            rep = classify(fam.LogCorrected(alpha, float(k), theta), fam.LogOverPower(float(e), 1.0 - alpha))
            rows.append((float(k), float(e), rep.cell_label()))
    return rows


def write_phase_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["kappa", "eta", "label"])
        for k, e, lab in rows:
            wr.writerow([repr(k), repr(e), lab])
