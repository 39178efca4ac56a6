import json
import math
from pathlib import Path

import numpy as np
import pytest

from gerw import families as fam
from gerw import regimes as reg

GOLDEN = json.loads((Path(__file__).parent / "golden" / "regimes.json").read_text())


def _classify(case):
    a = fam.family_from_dict(case["alpha"], "alpha")
    e = fam.family_from_dict(case["eps"], "eps")
    return reg.classify(a, e, case["q"])


def _check_asymptote(got, want):
    if want is None:
        assert got is None
        return
    assert got is not None
    assert got["form"] == want["form"]
    if want["constant"] is None:
        assert got["constant"] is None
    else:
        assert got["constant"] == pytest.approx(want["constant"], rel=1e-9)


@pytest.mark.parametrize("key", sorted(GOLDEN))
def test_golden_regime(key):
    case = GOLDEN[key]
    rep = _classify(case)
    assert rep.cell_label() == case["label"]
    assert rep.fluctuation["kind"] == case["fluctuation"]
    assert rep.modes == case["modes"]
    if "variance" in case:
        assert rep.fluctuation["variance"] == pytest.approx(case["variance"], rel=1e-12)
    if "value" in case:
        assert rep.law["value"] == pytest.approx(case["value"], rel=1e-12)
    _check_asymptote(rep.scaling["law_asymptote"], case["law_asymptote"])
    _check_asymptote(rep.scaling["fluctuation_asymptote"], case["fluctuation_asymptote"])


def test_c_alpha_rho_values():
    assert reg.c_alpha_rho(0.3, 0.2) == pytest.approx(1.12)
    for a in (0.0, 0.2, 0.7):
        assert reg.c_alpha_rho(a, 0.0) == pytest.approx(1.0)
    assert reg.c_alpha_rho(0.0, 0.4) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        reg.c_alpha_rho(0.6, 0.4)


def test_c_alpha_rho_increasing_in_rho():
    for a in np.linspace(0.05, 0.9, 10):
        rhos = np.linspace(0.0, 0.99 - a, 25)
        c = [reg.c_alpha_rho(a, r) for r in rhos]
        assert c[0] == pytest.approx(1.0)
        assert np.all(np.diff(c) > 0)


def test_mu_limit_cases():
    assert reg.mu_limit(fam.Constant(0.2), fam.PowerLaw(0.6)) == pytest.approx(0.0)
    mu = reg.mu_limit(fam.Constant(0.3), fam.PowerLaw(0.5))
    assert mu == pytest.approx(math.sqrt(0.4) * 0.7 / 0.2, rel=1e-9)
    assert reg.mu_limit(fam.Constant(0.3), fam.Constant(0.5)) == "infinite"


def test_trace_reproduces_label():
    # decide() is a pure function of the trace values
    for case in GOLDEN.values():
        rep = _classify(case)
        values = {t["condition"]: t["value"] for t in rep.trace}
        law, fl, modes = reg.decide(values)
        assert law == rep.law and fl == rep.fluctuation and modes == rep.modes


def test_trace_marks_every_condition():
    rep = reg.classify(fam.Constant(0.3), fam.PowerLaw(0.2))
    names = {t["condition"] for t in rep.trace}
    for needed in ("eps_limit", "alpha_limit", "sum_inv_a2_diverges", "sum_one_minus_eps_over_a2_diverges",
                   "sum_one_minus_alpha_over_n_diverges", "a_over_r_to_zero", "sum_inv_r2_finite", "rho_lt_half"):
        assert needed in names
    assert all(t["decided_by"] for t in rep.trace)


def test_fluctuation_result_is_primary():
    rep = reg.classify(fam.Constant(0.3), fam.PowerLaw(0.2))
    primary = [r for r in rep.results if r["primary"]]
    assert len(primary) == 1 and primary[0]["result"] == "clt_mean"
    assert {r["result"] for r in rep.results} >= {"lln_r", "l2_r"}


def test_gate_is_exclusive():
    for case in GOLDEN.values():
        rep = _classify(case)
        assert rep.verification in (None, "clt", "drift_fluctuation")
        if rep.fluctuation["kind"] in ("drift_clt", "drift_clt_degenerate"):
            assert rep.verification == "drift_fluctuation"
        elif rep.fluctuation["kind"] in ("clt_mean", "clt_degenerate"):
            assert rep.verification == "clt"


def test_random_drift_c_star_without_drift_terms():
    rep = reg.classify(fam.Constant(0.7), fam.Constant(0.0), q=0.8)
    assert rep.constants["c_star"] == pytest.approx(0.6)


def test_a_over_r_small_for_constant_law():
    from gerw.scaling import build_table

    t = build_table(fam.Constant(0.3), fam.PowerLaw(0.2), 10**6)
    ratio = t.a[-1] / t.r[-1]
    assert ratio < 1e-2


def test_report_json_field_names():
    d = reg.classify(fam.Constant(0.7), fam.Constant(0.0)).to_dict()
    assert {"law", "scaling", "trace", "modes", "constants"} <= set(d)
    json.dumps(d)


def test_phase_diagram_cells():
    rows = dict(((k, e), lab) for k, e, lab in reg.phase_diagram(1.0, 0.5, [0.25, 0.8], [0.25, 0.3, 0.5]))
    assert rows[(0.25, 0.25)] == "Normal(0,1)"
    assert rows[(0.25, 0.5)] == "Normal(%.10g,1)" % (1 / math.sqrt(0.5))
    assert rows[(0.8, 0.3)] == "RandomDrift"
    rows2 = reg.phase_diagram(2.0, 0.5, [0.3], [0.3, 0.5])
    assert [lab for _, _, lab in rows2] == ["Normal(0,1)", "Normal(1,1)"]


def test_phase_diagram_theta_two_negative_eta():
    # alpha = 1/2 with eta < 1/2 keeps the drift sum bounded relative to sqrt(w_n): centered limit
    rows = reg.phase_diagram(2.0, 0.5, [-0.5, 0.0, 0.5], [-0.5])
    assert {lab for _, _, lab in rows} == {"Normal(0,1)"}


def test_phase_diagram_empty_grid():
    with pytest.raises(ValueError):
        reg.phase_diagram(1.0, 0.5, [], [0.1])


def test_table_family_unclassified():
    rep = reg.classify(fam.Table((0.3,) * 5), fam.Constant(0.1))
    assert rep.law["kind"] == "Unclassified"
    assert "undecidable" in rep.law["reason"]
