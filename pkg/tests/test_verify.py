import json
import math

import numpy as np
import pytest
from scipy.stats import kstest, norm

from gerw import families as fam
from gerw import moments as mo
from gerw import simulator as sim
from gerw import verify as v
from gerw.regimes import c_alpha_rho
from gerw.scaling import build_table


def test_ks_single_point_at_mean():
    assert v.ks_distance([0.0], 0.0, 1.0) == pytest.approx(0.5)


def test_ks_quantile_sample():
    m = 100
    x = norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    assert v.ks_distance(x, 0.0, 1.0) <= 1 / (2 * m) + 1e-6


def test_ks_five_points_by_hand():
    # Phi(-1) = 0.158655; the largest gap is at the first and last points
    assert v.ks_distance([-1, -0.5, 0, 0.5, 1], 0.0, 1.0) == pytest.approx(0.158655, abs=1e-6)


def test_ks_matches_scipy():
    x = np.random.default_rng(1).standard_t(5, size=777)
    assert v.ks_distance(x, 0.1, 1.7) == pytest.approx(kstest(x, "norm", args=(0.1, math.sqrt(1.7))).statistic, abs=1e-12)


def test_ks_invariances():
    x = np.random.default_rng(2).normal(size=500)
    d = v.ks_distance(x, 0.2, 1.3)
    assert 0.0 <= d <= 1.0
    assert v.ks_distance(x + 7.5, 7.7, 1.3) == pytest.approx(d, abs=1e-12)
    assert v.ks_distance(3.0 * x, 0.6, 9 * 1.3) == pytest.approx(d, abs=1e-12)


def test_ks_rejects_bad_input():
    with pytest.raises(ValueError):
        v.ks_distance([1.0], 0.0, 0.0)
    with pytest.raises(ValueError):
        v.ks_distance([], 0.0, 1.0)


def test_ks_critical_value():
    assert v.ks_critical(1, 0.01) == pytest.approx(1.628, abs=1e-3)
    assert v.ks_critical(10**4, 0.01) == pytest.approx(0.01628, abs=1e-5)


def test_clt_calibration():
    rng = np.random.default_rng(0)
    passes = sum(
        v.verify_clt(rng.normal(0.3, 1.5, size=(1000, 1)), 0.0, 1.0, mean=0.3, variance=2.25).verdict
        for _ in range(100)
    )
    assert passes >= 99


def test_clt_perfect_sample_passes():
    m = 2000
    x = norm.ppf((np.arange(1, m + 1) - 0.5) / m)[:, None]
    rep = v.verify_clt(x, 0.0, 1.0)
    assert rep.verdict and rep.passed == [True]


def test_clt_rejects_wrong_law_and_flags_degenerate():
    x = np.random.default_rng(3).normal(0.0, 2.0, size=(2000, 1))
    assert not v.verify_clt(x, 0.0, 1.0).verdict
    rep = v.verify_clt(np.zeros((1000, 1)), 0.0, 1.0)
    assert "degenerate" in rep.flags and not rep.verdict
    with pytest.raises(ValueError):
        v.verify_clt(x, 0.0, 1.0, variance=0.0)
    with pytest.raises(ValueError):
        v.verify_clt(x[:10], 0.0, 1.0)


def test_clt_only_last_checkpoint_gates():
    rng = np.random.default_rng(4)
    x = np.column_stack([rng.normal(0, 3, 2000), rng.normal(0, 1, 2000)])
    rep = v.verify_clt(x, 0.0, 1.0, checkpoints=[10, 20])
    assert rep.passed == [False, True] and rep.verdict


def test_lln_degenerate_walk_is_exact():
    ens = sim.simulate_ensemble(fam.Constant(0.4), fam.Constant(1.0), 1.0, 500, [50, 500], m=20, master_seed=1)
    rep = v.verify_lln(ens, [50.0, 500.0])
    assert rep.statistics["mean_abs_dev"] == [0.0, 0.0] and rep.verdict
    rep2 = v.verify_l2(ens, [50.0, 500.0])
    assert rep2.statistics["mean_sq_dev"] == [0.0, 0.0] and rep2.verdict


def test_lln_zero_r_rejected():
    with pytest.raises(ValueError):
        v.verify_lln(np.ones((5, 2)), [1.0, 0.0])


def test_lln_positive_drift():
    alpha, eps = fam.Constant(0.3), fam.Constant(0.5)
    cps = [1000, 10**4, 10**5]
    ens = sim.simulate_ensemble(alpha, eps, 0.5, cps[-1], cps, m=1000, master_seed=2)
    r = build_table(alpha, eps, cps[-1]).r[np.array(cps) - 1]
    rep = v.verify_lln(ens, r, tolerance=0.01)
    assert rep.verdict, rep.statistics


def test_l2_exact_moment_ratio():
    alpha, eps = fam.Constant(0.3), fam.PowerLaw(0.2)
    mt = mo.moment_table(alpha, eps, 0.5, 10**6)
    assert mt.second[-1] / mt.mean[-1] ** 2 == pytest.approx(1.0, abs=0.02)


def test_l2_statistic_decreases():
    alpha, eps = fam.Constant(0.25), fam.PowerLaw(0.3)
    cps = [1000, 10**4, 10**5]
    ens = sim.simulate_ensemble(alpha, eps, 0.5, cps[-1], cps, m=1000, master_seed=3)
    r = build_table(alpha, eps, cps[-1]).r[np.array(cps) - 1]
    stat = v.verify_l2(ens, r).statistics["mean_sq_dev"]
    assert stat[0] > stat[1] > stat[2]


def test_drift_fluctuation_degenerate_walk():
    alpha, eps = fam.Constant(0.7), fam.Constant(1.0)
    N = 400
    ens = sim.simulate_ensemble(alpha, eps, 1.0, N, [4, N], m=1000, master_seed=1)
    rep = v.verify_drift_fluctuation(ens, build_table(alpha, eps, N), mo.moment_table(alpha, eps, 1.0, N),
                                     4, N, 1.0, which="z")
    assert "degenerate" in rep.flags and not rep.verdict


def test_drift_fluctuation_needs_long_horizon():
    alpha, eps = fam.Constant(0.7), fam.Constant(0.0)
    ens = sim.simulate_ensemble(alpha, eps, 0.5, 100, [50, 100], m=10, master_seed=1)
    with pytest.raises(ValueError):
        v.verify_drift_fluctuation(ens, build_table(alpha, eps, 100), mo.moment_table(alpha, eps, 0.5, 100),
                                   100, 50, 2.5)


def test_drift_fluctuation_residual_standardized():
    alpha, eps, q = fam.Constant(0.7), fam.Constant(0.0), 0.5
    n, N = 1000, 10**5
    ens = sim.simulate_ensemble(alpha, eps, q, N, [n, N], m=2000, master_seed=9)
    rep = v.verify_drift_fluctuation(ens, build_table(alpha, eps, N), mo.moment_table(alpha, eps, q, N), n, N, 1.0)
    assert rep.verdict, rep.statistics


def test_quad_variation_memoryless_walk():
    alpha, eps = fam.Constant(0.0), fam.Constant(0.0)
    tab = build_table(alpha, eps, 300)
    tr = sim.simulate_trajectory(alpha, eps, 0.5, 300, [300], stream_seed=2, record_steps=True)
    assert np.allclose(v.quad_variation_curve(tr, tab, 0.5), np.arange(1, 301))


def test_quad_variation_bounds():
    alpha, eps, q = fam.Constant(0.4), fam.PowerLaw(0.3), 0.7
    tab = build_table(alpha, eps, 5000)
    tr = sim.simulate_trajectory(alpha, eps, q, 5000, [5000], stream_seed=8, record_steps=True)
    curve = v.quad_variation_curve(tr, tab, q)
    assert np.all(np.diff(curve) >= 0)
    assert np.all(curve <= tab.w * (1 + 1e-12))
    with pytest.raises(ValueError):
        v.quad_variation_curve(sim.simulate_trajectory(alpha, eps, q, 10, [10], stream_seed=1), tab, q)


def test_quad_variation_ratio_eps_below_one():
    alpha, eps, q = fam.Constant(0.2), fam.Constant(0.4), 0.5
    N = 10**5
    tab = build_table(alpha, eps, N)
    curves = [v.quad_variation_curve(sim.simulate_trajectory(alpha, eps, q, N, [N], stream_seed=s, record_steps=True),
                                     tab, q) for s in range(20)]
    cps = np.array([1000, N])
    rep = v.verify_quad_variation(curves, (1 - 0.4**2) * tab.w[cps - 1], cps)
    assert rep.verdict, rep.statistics


def test_rate_targets_and_errors():
    alpha, rho = 0.3, 0.2
    n = 10**5
    eps = fam.OneMinusPowerLaw(rho)
    ens = sim.simulate_ensemble(fam.Constant(alpha), eps, 0.5, n, [n], m=200, master_seed=4)
    rep = v.verify_rate(ens, fam.eval_eps(eps, n), alpha, rho)
    assert rep.thresholds["median"] == pytest.approx(-1.4)
    assert rep.verdict, rep.statistics
    rep0 = v.verify_rate(np.zeros((3, 1)), 0.5, 0.0, 0.3)
    assert rep0.thresholds["median"] == pytest.approx(-1 / 0.7)
    with pytest.raises(ValueError):
        v.verify_rate(ens, 1.0, alpha, rho)
    with pytest.raises(ValueError):
        v.verify_rate(ens, 0.9, alpha, 0.6)


def test_c_alpha_rho_matches_quad_target_example():
    assert c_alpha_rho(0.3, 0.2) == pytest.approx(1.12)


def test_lil_degenerate_and_advisory():
    n = np.arange(10**4, 10**5 + 1, 1000)
    rep = v.verify_lil(np.tile(n, (20, 1)), n, n, v.lil_phi(n), 1.0)
    assert rep.advisory and "heuristic" in rep.flags and "degenerate" in rep.flags
    assert rep.statistics["running_max"] == [0.0] * 20
    assert v.lil_phi(np.e**np.e) == pytest.approx(math.sqrt(2 * math.e**math.e))


def test_lil_band_counts():
    n = np.array([100, 1000])
    paths = np.array([[0.0, 1.0], [0.0, 3.0]]) * v.lil_phi(n)
    rep = v.verify_lil(paths, n, 0.0, v.lil_phi(n), 1.0, min_fraction=0.5)
    assert rep.statistics["fraction_in_band"] == [0.5] and rep.passed == [True]


def test_report_serialization(tmp_path):
    rep = v.verify_clt(np.random.default_rng(5).normal(size=(1000, 2)), 0.0, 1.0, checkpoints=[10, 20])
    d = json.loads(rep.to_json())
    assert {"kind", "checkpoints", "statistics", "thresholds", "passed", "verdict", "metadata"} <= set(d)
    assert d["verdict"] == rep.verdict
    v.write_summary_csv([rep], tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "test,n,statistic,threshold,verdict"
    assert len(lines) == 3


def test_verdict_needs_every_mandatory_checkpoint():
    rep = v.TestReport(kind="x", checkpoints=[1, 2], statistics={}, thresholds={}, passed=[False, True],
                       mandatory=[True, True])
    assert not rep.verdict
    rep = v.TestReport(kind="x", checkpoints=[1, 2], statistics={}, thresholds={}, passed=[False, True],
                       mandatory=[False, True])
    assert rep.verdict
