import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ringattractor import RingConfig, ConfigError, active_set, build_connectivity, drift, relu
from ringattractor.model import bitstring, bump_thresholds, lipschitz_bound
from ringattractor.deterministic import integrate, stationary_bump

finite = st.floats(-10, 10, allow_nan=False)


def cfg2(**kw):
    return RingConfig(N=2, delta=0.2, V=[1.0, 0.0], **kw)


# ---------------------------------------------------------------- config

def test_config_defaults_and_roundtrip(tmp_path):
    cfg = RingConfig(N=3, delta=0.1, sigma=0.1)
    assert cfg.tau == 1.0 and cfg.c == 1.0 and cfg.lam == 0.0
    np.testing.assert_array_equal(cfg.sigma, [0.1, 0.1, 0.1])
    np.testing.assert_array_equal(cfg.V, 0.0)
    p = tmp_path / "c.json"
    cfg.to_json(p)
    back = RingConfig.from_json(p)
    assert back.to_dict() == cfg.to_dict()
    assert json.loads(p.read_text())["lambda"] == 0.0


def test_config_collects_all_errors():
    with pytest.raises(ConfigError) as exc:
        RingConfig.from_dict({"N": 1, "tau": -1, "sigma": [-1], "bogus": 3})
    msgs = " | ".join(exc.value.errors)
    assert "N ≥ 2" in msgs
    assert "tau > 0" in msgs
    assert "sigma" in msgs
    assert "unknown fields: bogus" in msgs


def test_config_switching_needs_positive_cue():
    with pytest.raises(ConfigError, match="c > 0"):
        RingConfig(N=2, lam=0.1, c=0.0)
    RingConfig(N=2, lam=0.0, c=0.0)


def test_config_arrays_read_only():
    cfg = cfg2()
    with pytest.raises(ValueError):
        cfg.V[0] = 3.0
    with pytest.raises(ValueError):
        cfg.connectivity[0, 0] = 3.0


def test_config_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed"):
        RingConfig.from_json(p)


def test_theta_recomputed():
    cfg = RingConfig(N=4)
    np.testing.assert_allclose(cfg.theta, [0, np.pi / 2, np.pi, 3 * np.pi / 2])


def test_cue_vector():
    v = RingConfig(N=5, c=2.0).cue_vector(3)
    np.testing.assert_array_equal(v, [0, 0, 2.0, 0, 0])
    with pytest.raises(ValueError):
        RingConfig(N=5).cue_vector(0)


# ---------------------------------------------------------------- connectivity

def test_connectivity_n2():
    np.testing.assert_allclose(build_connectivity(cfg2()), [[0.2, -0.2], [-0.2, 0.2]],
                               atol=1e-15)


def test_connectivity_n4_row():
    A = build_connectivity(RingConfig(N=4, delta=1.0))
    np.testing.assert_allclose(A[0], [1, 0, -1, 0], atol=1e-15)


def test_connectivity_n50_entry():
    A = build_connectivity(RingConfig(N=50, delta=0.05))
    # independent evaluation: theta_0 - theta_25 = -pi
    assert A[0, 25] == pytest.approx(0.05 * math.cos(-math.pi), abs=1e-15)


def test_connectivity_shift_terms():
    N = 8
    cfg = RingConfig(N=N, j0=0.3, delta=0.5, lshift=0.2, rshift=-0.1)
    A = build_connectivity(cfg)
    for i in range(N):
        for j in range(N):
            d = 2 * math.pi * (i - j) / N
            ref = (0.3 + 0.5 * math.cos(d) + 0.2 * math.cos(d + math.pi / 4)
                   - 0.1 * math.cos(d - math.pi / 4))
            assert A[i, j] == pytest.approx(ref, abs=1e-14)


@given(st.integers(2, 30), st.floats(0, 3), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(-1, 1))
def test_connectivity_circulant(N, delta, j0, l, r):
    A = build_connectivity(RingConfig(N=N, delta=delta, j0=j0, lshift=l, rshift=r))
    for k in range(N):
        np.testing.assert_allclose(np.roll(np.roll(A, k, 0), k, 1), A, atol=1e-12)


@given(st.integers(2, 30), st.floats(0, 3))
def test_reduced_connectivity_symmetric_bounded(N, delta):
    A = build_connectivity(RingConfig(N=N, delta=delta))
    np.testing.assert_allclose(A, A.T, atol=1e-15)
    assert np.all(np.abs(A) <= delta + 1e-15)


# ---------------------------------------------------------------- relu and drift

@pytest.mark.parametrize("x,y", [(2.0, 2.0), (-1.0, 0.0), (0.0, 0.0)])
def test_relu_examples(x, y):
    assert relu(x) == y


@given(finite, finite)
def test_relu_one_lipschitz(a, b):
    assert abs(relu(a) - relu(b)) <= abs(a - b) + 1e-15


def test_drift_examples():
    cfg = cfg2()
    np.testing.assert_allclose(drift([1.25, 0.0], cfg.V, cfg.connectivity), [0, 0], atol=1e-15)
    np.testing.assert_allclose(drift([0.0, 0.0], cfg.V, cfg.connectivity), [1, 0])


def test_drift_zero_at_bump():
    cfg = RingConfig(N=50, delta=0.05, V=np.eye(50)[0])
    with pytest.warns(UserWarning):
        b = stationary_bump(50, 0.05, 1.0)
    assert np.max(np.abs(drift(b.rbar, cfg.V, cfg.connectivity))) <= 1e-12
    # oracle: long-time integration lands on the same point
    end = integrate(np.zeros(50), 200.0, cfg, t_eval=[200.0]).final
    np.testing.assert_allclose(end, b.rbar, atol=1e-8)


def test_drift_dimension_mismatch():
    cfg = cfg2()
    with pytest.raises(ConfigError):
        drift([1.0, 2.0, 3.0], cfg.V, cfg.connectivity)


def test_drift_tau_scaling():
    cfg = cfg2()
    np.testing.assert_allclose(drift([0.0, 0.0], cfg.V, cfg.connectivity, tau=2.0), [0.5, 0])


@settings(max_examples=50)
@given(st.integers(3, 20), st.integers(0, 19), st.floats(0, 2), st.integers(0, 2**31))
def test_drift_rotation_equivariant(N, k, delta, seed):
    k %= N
    rng = np.random.default_rng(seed)
    A = build_connectivity(RingConfig(N=N, delta=delta))
    r, V = rng.normal(size=N), rng.normal(size=N)
    lhs = drift(np.roll(r, k), np.roll(V, k), A)
    np.testing.assert_allclose(lhs, np.roll(drift(r, V, A), k), atol=1e-12)


# ---------------------------------------------------------------- active sets

def test_active_set_examples():
    cfg = cfg2()
    A, V = cfg.connectivity, cfg.V
    assert active_set([0.0, 0.0], V, A) == frozenset({0})
    assert active_set([1.25, 0.0], V, A) == frozenset({0})
    assert active_set([0.0, 0.0], np.zeros(2), A) == frozenset()


def test_bitstring():
    assert bitstring({0, 2}, 4) == "1010"
    assert bitstring(np.array([False, True]), 2) == "01"
    assert bitstring(set(), 3) == "000"


# ---------------------------------------------------------------- Lipschitz

def test_lipschitz_examples():
    # oracle: eigenvalues of 0.2 [[1, -1], [-1, 1]] are 0 and 0.4
    assert lipschitz_bound(cfg2()) == pytest.approx(1.4, abs=1e-14)
    assert lipschitz_bound(RingConfig(N=5, tau=2.0)) == pytest.approx(0.5)


@pytest.mark.parametrize("N,delta", [(2, 0.2), (10, 0.8), (50, 0.05)])
def test_drift_lipschitz_random_pairs(N, delta):
    rng = np.random.default_rng(N)
    cfg = RingConfig(N=N, delta=delta, V=rng.normal(size=N))
    C = lipschitz_bound(cfg)
    x = rng.normal(scale=3, size=(100_000, N))
    y = x + rng.normal(scale=rng.choice([1e-3, 1, 10]), size=(100_000, N))
    lhs = np.linalg.norm(drift(x, cfg.V, cfg.connectivity) - drift(y, cfg.V, cfg.connectivity),
                         axis=1)
    assert np.all(lhs <= C * np.linalg.norm(x - y, axis=1) * (1 + 1e-12))


@settings(max_examples=30, deadline=None)
@given(arrays(float, 4, elements=st.floats(0, 5)), st.floats(0, 0.45),
       arrays(float, 4, elements=st.floats(-2, 2)))
def test_flow_keeps_nonnegative(r0, delta, V):
    cfg = RingConfig(N=4, delta=delta, V=V)
    traj = integrate(r0, 10.0, cfg)
    assert np.all(traj.states >= -1e-12)


def test_bump_thresholds_n50():
    thr = bump_thresholds(50)
    assert thr["cos"] == pytest.approx(0.08)
    assert thr["sin_arc"] == pytest.approx(0.08)
    assert thr["sin_full"] == pytest.approx(0.04)
