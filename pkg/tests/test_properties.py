import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from gerw import families as fam
from gerw import moments as mo
from gerw import simulator as sim
from gerw import verify as v
from gerw.scaling import build_table

unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def walk_states(draw):
    n = draw(st.integers(1, 10**6))
    return sim.WalkState(n, draw(st.integers(0, n)))


@given(walk_states(), unit, unit)
def test_step_probability_in_unit_interval(state, a, e):
    p = sim.step_probability(state, a, e)
    assert 0.0 <= p <= 1.0


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=200),
       st.floats(-10, 10), st.floats(0.01, 100), st.floats(-50, 50), st.floats(0.1, 10))
def test_ks_bounds_and_invariance(xs, mu, var, shift, scale):
    x = np.asarray(xs)
    d = v.ks_distance(x, mu, var)
    assert 0.0 <= d <= 1.0
    assert abs(v.ks_distance(scale * x + shift, scale * mu + shift, scale**2 * var) - d) < 1e-9


@settings(max_examples=40, deadline=None)
@given(unit, st.floats(-1.0, 1.0), unit, st.integers(1, 10))
def test_recursion_matches_oracle(a, e, q, n):
    alpha, eps = fam.Constant(a), fam.Constant(abs(e))
    tab = mo.moment_table(alpha, eps, q, n)
    orc = mo.enumerate_paths(alpha, eps, q, n)
    assert abs(orc.mean - tab.mean[-1]) < 1e-12
    assert abs(orc.second - tab.second[-1]) < 1e-11
    assert abs(orc.total - 1.0) < 1e-12


@settings(max_examples=30, deadline=None)
@given(unit, unit, unit)
def test_moment_bounds(a, e, q):
    N = 500
    tab = mo.moment_table(fam.Constant(a), fam.Constant(e), q, N)
    n = np.arange(1, N + 1)
    assert np.all(np.abs(tab.mean) <= n + 1e-9)
    assert np.all(tab.variance >= 0)
    assert np.all(tab.second <= n.astype(float) ** 2 * (1 + 1e-12))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-3.0, 3.0), st.sampled_from([0.5, 1.0, 2.0]))
def test_factorization_any_log_corrected(a, kappa, theta):
    t = build_table(fam.LogCorrected(a, kappa, theta), fam.Constant(0.0), 3000)
    assert np.max(np.abs(t.g * t.l / t.a - 1)) < 1e-10
    assert np.all(np.diff(t.a) >= 0)


@settings(max_examples=25, deadline=None)
@given(unit, unit, unit, st.integers(0, 2**63))
def test_parity_of_simulated_walks(a, e, q, seed):
    cps = [1, 2, 3, 10, 57]
    tr = sim.simulate_trajectory(fam.Constant(a), fam.Constant(e), q, 57, cps, stream_seed=seed)
    assert np.all(np.abs(tr.values) <= cps)
    assert np.all((tr.values - np.asarray(cps)) % 2 == 0)


@given(st.sampled_from(["constant", "power_law", "inverse_log_power", "one_minus_power_law"]), st.floats(0.01, 1.0))
def test_eps_family_round_trip(kind, x):
    key = {"constant": "value", "power_law": "rho", "inverse_log_power": "eta", "one_minus_power_law": "rho"}[kind]
    f = fam.family_from_dict({"kind": kind, key: x}, "eps")
    assert fam.family_from_dict(f.to_dict(), "eps") == f
