import json

import numpy as np
import pytest
from scipy.stats import ks_2samp

from ringattractor import (RingConfig, detect_modes, empirical_measure, ergodic_agreement,
                           invariance_residual, simulate_sde, time_average)
from ringattractor.ergodics import EmpiricalMeasure, default_edges, window_integral
from ringattractor.exceptions import PreconditionError
from ringattractor.stochastic import SdePath, coordinate, indicator


def switching_cfg(**kw):
    base = dict(N=2, delta=0.2, sigma=0.1, lam=0.1, c=1.0, chain_kind="two_state")
    base.update(kw)
    return RingConfig(**base)


def const_path(x, T=10.0, n=101, i=1):
    t = np.linspace(0, T, n)
    X = np.tile(np.asarray(x, dtype=float), (n, 1))
    return SdePath(t, X, np.full(n, i), np.array([]), np.array([], dtype=int), 0, 0, t[1])


@pytest.fixture(scope="module")
def long_path():
    return simulate_sde((np.zeros(2), 1), 4000.0, 1e-3, switching_cfg(), seed=5, record_every=10)


# ---------------------------------------------------------------- measure

def test_constant_path_unit_mass():
    p = const_path([0.35, 0.75])
    m = empirical_measure(p, bins=[np.linspace(0, 1, 11)] * 2)
    assert m.mass.sum() == pytest.approx(1.0, abs=1e-12)
    assert m.mass[3, 7, 0] == pytest.approx(1.0)
    assert m.overflow == 0.0


def test_fixed_point_path_single_bin():
    cfg = switching_cfg(sigma=0.0, lam=0.0)
    p = simulate_sde((np.array([1.25, 0.0]), 1), 50.0, 1e-3, cfg, record_every=10)
    edges = [default_edges(cfg, 0), default_edges(cfg, 1)]
    m = empirical_measure(p, bins=edges)
    assert np.count_nonzero(m.mass) == 1
    k = np.searchsorted(edges[0], 1.25, side="right") - 1
    assert m.marginal(0)[k] == pytest.approx(1.0)
    modes = detect_modes(m, 0)
    assert modes.locations.size == 1
    assert edges[0][k] <= modes.locations[0] <= edges[0][k + 1]


def test_empty_window_rejected():
    with pytest.raises(PreconditionError):
        empirical_measure(const_path([0, 0], T=1.0), burn_in=1.0)


def test_mass_and_state_mass_match_jump_times(long_path):
    p = long_path
    burn = 400.0
    m = empirical_measure(p, bins=50, burn_in=burn)
    assert m.mass.sum() == pytest.approx(1.0, abs=1e-12)
    # direct occupation from jump times
    edges = np.concatenate([[0.0], p.jump_times, [p.T]])
    states = np.concatenate([[1], p.jump_states])
    lo = np.clip(edges[:-1], burn, None)
    hi = np.clip(edges[1:], burn, None)
    occ1 = np.sum((hi - lo)[states == 1]) / (p.T - burn)
    assert m.state_mass()[0] == pytest.approx(occ1, abs=1e-12)


def test_overflow_tracked():
    p = const_path([5.0, 0.5])
    m = empirical_measure(p, bins=[np.linspace(0, 1, 5)] * 2)
    assert m.overflow == pytest.approx(1.0)
    assert m.mass[-1, 2, 0] == pytest.approx(1.0)


def test_merge_associative():
    a = empirical_measure(const_path([0.1, 0.1]), bins=[np.linspace(0, 1, 5)] * 2)
    b = empirical_measure(const_path([0.6, 0.1], T=20.0), bins=[np.linspace(0, 1, 5)] * 2)
    c = empirical_measure(const_path([0.9, 0.9], i=2), bins=[np.linspace(0, 1, 5)] * 2)
    left = a.merge(b).merge(c)
    right = a.merge(b.merge(c))
    np.testing.assert_allclose(left.weights, right.weights)
    assert left.mass.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        a.merge(empirical_measure(const_path([0.1, 0.1]), bins=[np.linspace(0, 2, 5)] * 2))


def test_histogram_csv(tmp_path, long_path):
    m = empirical_measure(long_path, bins=[default_edges(switching_cfg(), 0)] * 2)
    out = tmp_path / "h.csv"
    m.to_csv(out, 0)
    rows = out.read_text().splitlines()
    assert rows[0] == "bin_center,state,mass"
    assert len(rows) == 1 + 2 * 100
    total = sum(float(r.split(",")[2]) for r in rows[1:])
    assert total == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------- averages

def test_time_average_constant_one(long_path):
    one = lambda x, i: np.ones(x.shape[0])  # noqa: E731
    mean, se = time_average(one, long_path)
    assert mean == pytest.approx(1.0, abs=1e-12) and se == pytest.approx(0.0, abs=1e-12)


def test_time_average_chain_half(long_path):
    mean, se = time_average(indicator(1, 2), long_path, burn_in=400.0)
    assert abs(mean - 0.5) <= 3 * se + 1e-12


def test_time_average_symmetry(long_path):
    f = lambda x, i: x[:, 0] + x[:, 1]  # noqa: E731
    m_sum, se_sum = time_average(f, long_path, burn_in=400.0)
    m1, se1 = time_average(coordinate(0, 2), long_path, burn_in=400.0)
    assert abs(m_sum - 2 * m1) <= 3 * np.hypot(se_sum, 2 * se1)


def test_window_integral_piecewise_constant():
    t = np.array([0.0, 1.0, 3.0])
    v = np.array([2.0, 5.0, 7.0])
    assert window_integral(t, v, 0.5, 2.0) == pytest.approx(0.5 * 2 + 1.0 * 5)


# ---------------------------------------------------------------- invariance residual

def test_invariance_residual_zero_shift(long_path):
    assert invariance_residual(long_path, coordinate(0, 2), 0.0, 1000.0) == 0.0


def test_invariance_residual_bounded_f(long_path):
    f = lambda x, i: np.clip(x[:, 0], -1, 1)  # noqa: E731
    for T, s in ((100.0, 10.0), (1000.0, 50.0), (3000.0, 1.0)):
        assert invariance_residual(long_path, f, s, T) <= 2 * s / T + 1e-12


def test_invariance_residual_needs_long_path(long_path):
    with pytest.raises(PreconditionError):
        invariance_residual(long_path, coordinate(0, 2), 10.0, 4000.0)


# ---------------------------------------------------------------- agreement

def test_agreement_deterministic_limit():
    cfg = switching_cfg(sigma=0.0, lam=0.0)
    rep = ergodic_agreement(cfg, coordinate(0, 2), (np.zeros(2), 1),
                            (np.array([5.0, 5.0]), 1), 200.0, dt=1e-3)
    assert rep.agree
    assert rep.mean_a == pytest.approx(1.25, abs=1e-4)
    assert rep.mean_b == pytest.approx(1.25, abs=1e-4)


def test_agreement_identical_runs():
    cfg = switching_cfg()
    z = (np.zeros(2), 1)
    rep = ergodic_agreement(cfg, coordinate(0, 2), z, z, 200.0, seeds=(3, 3))
    assert rep.mean_a == rep.mean_b and rep.agree


# ---------------------------------------------------------------- modes

def _measure_from_marginal(marg, lo=0.0, hi=1.0):
    edges = np.linspace(lo, hi, marg.size + 1)
    w = np.asarray(marg, dtype=float)[:, None]
    return EmpiricalMeasure([edges], (0,), w, float(w.sum()), 0.0)


def test_modes_unimodal_gaussian():
    x = np.linspace(-3, 3, 60)
    m = _measure_from_marginal(np.exp(-x**2 / 2))
    rep = detect_modes(m, 0)
    assert rep.locations.size == 1
    assert rep.separation == 0.0
    assert rep.masses.sum() == pytest.approx(1.0)


def test_modes_bimodal_and_threshold():
    x = np.linspace(-4, 4, 100)
    marg = np.exp(-(x + 2) ** 2 * 4) + 0.5 * np.exp(-(x - 2) ** 2 * 4) + 0.02 * np.exp(-x**2 * 50)
    rep = detect_modes(_measure_from_marginal(marg, -4, 4), 0)
    assert rep.locations.size == 2
    np.testing.assert_allclose(rep.locations, [-2, 2], atol=0.1)
    assert rep.separation > 0.9
    assert rep.masses.sum() == pytest.approx(1.0)


def test_modes_json(tmp_path):
    x = np.linspace(-3, 3, 60)
    rep = detect_modes(_measure_from_marginal(np.exp(-x**2)), 0)
    doc = rep.to_json(tmp_path / "m.json")
    assert json.loads((tmp_path / "m.json").read_text()) == doc
    assert set(doc) == {"modes", "separation"} and set(doc["modes"][0]) == {"x", "mass"}


def test_long_run_bimodal_and_marginals_agree(long_path):
    cfg = switching_cfg()
    edges = [default_edges(cfg, 0), default_edges(cfg, 1)]
    m = empirical_measure(long_path, bins=edges)
    for k in (0, 1):
        rep = detect_modes(m, k)
        assert rep.locations.size == 2
        assert abs(rep.locations[0]) <= 0.2
        assert abs(rep.locations[1] - 1.25) <= 0.3
    # r1 and r2 marginals: two-sample KS on thinned samples after burn-in
    keep = long_path.times > 400.0
    a = long_path.states[keep, 0][::200]
    b = long_path.states[keep, 1][::200]
    assert ks_2samp(a, b).pvalue > 1e-3
