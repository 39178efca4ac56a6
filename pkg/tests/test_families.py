import math

import numpy as np
import pytest

from gerw import families as fam

ALPHAS = [
    fam.Constant(0.3),
    fam.LogCorrected(0.5, -1.0, 1.0),
    fam.LogCorrected(0.9, 5.0, 1.0),
    fam.ApproachOne(1.0, 0.5),
    fam.ApproachOne(3.0, 2.0),
]
EPSES = [
    fam.Constant(0.0),
    fam.PowerLaw(0.2),
    fam.LogOverPower(0.5, 0.5),
    fam.LogOverPower(-2.0, 1.0),
    fam.InverseLogPower(0.7),
    fam.OneMinusPowerLaw(0.3),
    fam.OneMinusLogOverPower(0.5, 0.4),
    fam.OneMinusInverseLogPower(2.0),
]


def test_constant_alpha():
    assert fam.eval_alpha(fam.Constant(0.3), 17) == 0.3


def test_approach_one_at_e_squared():
    n = 7
    assert fam.eval_alpha(fam.ApproachOne(1.0, 1.0), n) == pytest.approx(1 - 1 / math.log(7), abs=1e-12)
    assert fam.eval_alpha(fam.ApproachOne(1.0, 1.0), n) == pytest.approx(0.48610, abs=1e-5)


def test_log_corrected_clamps_high():
    assert fam.eval_alpha(fam.LogCorrected(0.9, 5.0, 1.0), 2) == 1.0


def test_power_law_eps():
    assert fam.eval_eps(fam.PowerLaw(0.0), 12345) == 1.0
    assert fam.eval_eps(fam.PowerLaw(0.5), 4) == pytest.approx(0.5)
    assert fam.eval_eps(fam.Constant(0.0), 99) == 0.0


def test_log_families_at_one_use_base():
    assert fam.eval_alpha(fam.LogCorrected(0.4, 2.0, 1.0), 1) == 0.4
    assert fam.eval_alpha(fam.ApproachOne(2.0, 1.0), 1) == 1.0


def test_table_index_error():
    t = fam.Table((0.1, 0.2, 0.3))
    assert fam.eval_eps(t, 3) == 0.3
    with pytest.raises(IndexError):
        fam.eval_eps(t, 4)


def test_n_zero_rejected():
    with pytest.raises(ValueError):
        fam.eval_alpha(fam.Constant(0.1), 0)


def test_wrong_role_rejected():
    with pytest.raises(TypeError):
        fam.eval_alpha(fam.PowerLaw(0.2), 3)
    with pytest.raises(ValueError):
        fam.family_from_dict({"kind": "power_law", "rho": 0.2}, "alpha")


@pytest.mark.parametrize("family", ALPHAS + EPSES, ids=lambda f: f.describe())
def test_values_in_unit_interval(family):
    role = "alpha" if family in ALPHAS else "eps"
    ev = fam.alpha_values(family, 10**5) if role == "alpha" else fam.eps_values(family, 10**5)
    assert np.all((ev.values >= 0) & (ev.values <= 1))


def test_clamp_record_is_a_prefix():
    ev = fam.alpha_values(fam.LogCorrected(0.5, 1.0, 1.0), 1000)
    # 0.5 + 1/log n > 1 exactly for 2 <= n <= 7
    assert (ev.first_clamp, ev.last_clamp, ev.n_clamped) == (2, 7, 6)
    assert np.all(ev.values[7:] < 1.0)
    again = fam.alpha_values(fam.LogCorrected(0.5, 1.0, 1.0), 1000)
    assert np.array_equal(again.values, ev.values)


def test_limits():
    assert fam.Constant(0.3).limit() == 0.3
    assert fam.LogCorrected(0.4, 1.0, 1.0).limit() == 0.4
    assert fam.ApproachOne(2.0, 1.0).limit() == 1.0
    assert fam.OneMinusPowerLaw(0.2).limit() == 1.0
    assert fam.PowerLaw(0.2).limit() == 0.0
    assert fam.InverseLogPower(0.5).limit() == 0.0


def test_constant_limit_matches_far_value():
    assert abs(fam.eval_alpha(fam.Constant(0.3), 10**8) - 0.3) < 1e-6


def test_metadata_power_drift():
    m = fam.family_metadata(fam.Constant(0.3), fam.PowerLaw(0.2))
    assert m.alpha_limit == 0.3 and m.eps_limit == 0.0
    assert m.eps_index == pytest.approx(-0.2)
    assert m.sum_inv_a2_diverges is True


def test_metadata_superdiffusive():
    m = fam.family_metadata(fam.Constant(0.7), fam.Constant(0.0))
    assert m.sum_inv_a2_diverges is False


def test_metadata_alpha_one():
    m = fam.family_metadata(fam.Constant(1.0), fam.Constant(0.4))
    assert m.sum_one_minus_alpha_over_n_diverges is False


def test_metadata_degenerate_drift():
    m = fam.family_metadata(fam.Constant(0.3), fam.OneMinusPowerLaw(0.2))
    assert m.eps_limit == 1.0
    assert m.one_minus_eps_index == pytest.approx(-0.2)
    assert m.sum_one_minus_eps_over_a2_diverges is True
    m = fam.family_metadata(fam.Constant(0.6), fam.OneMinusPowerLaw(0.3))
    assert m.sum_one_minus_eps_over_a2_diverges is False


def test_metadata_approach_one():
    assert fam.family_metadata(fam.ApproachOne(1.0, 1.0), fam.Constant(0.5)).sum_one_minus_alpha_over_n_diverges
    assert not fam.family_metadata(fam.ApproachOne(1.0, 2.0), fam.Constant(0.5)).sum_one_minus_alpha_over_n_diverges


def test_metadata_table_unknown():
    m = fam.family_metadata(fam.Table((0.2, 0.3)), fam.Constant(0.0))
    assert not m.decidable
    assert m.sum_inv_a2_diverges is None


def test_dict_round_trip():
    for f in ALPHAS:
        assert fam.family_from_dict(f.to_dict(), "alpha") == f
    for f in EPSES:
        assert fam.family_from_dict(f.to_dict(), "eps") == f
    t = fam.Table((0.1, 0.2))
    assert fam.family_from_dict(t.to_dict(), "eps") == t


def test_unknown_kind():
    with pytest.raises(ValueError):
        fam.family_from_dict({"kind": "spline"})


def test_invalid_parameters():
    with pytest.raises(ValueError):
        fam.Constant(1.2)
    with pytest.raises(ValueError):
        fam.LogCorrected(0.5, 1.0, 0.0)
