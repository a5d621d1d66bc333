import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from memtrain.device import ConfigurationError
from memtrain.snn import (
    LifParams, NetworkState, classify_counts, delta_modulate, leaky_filter, lif_step, poisson_encode,
    pseudo_derivative, read_raster_csv, readout_step, run_lif, write_raster_csv,
)

P = LifParams()


def test_params():
    assert 0 < P.alpha < 1 and 0 < P.kappa <= 1
    with pytest.raises(ConfigurationError):
        LifParams(v_th=0)


def test_quiescence():
    s = NetworkState.zeros(3, 1)
    for _ in range(5):
        s = lif_step(s, np.zeros(2), np.zeros((3, 2)), np.zeros((3, 3)), P)
        assert not s.v.any() and not s.z.any()


def test_spike_and_reset_example():
    s = NetworkState(v=np.array([1.2]), z=np.zeros(1), y=np.zeros(1))
    out = lif_step(s, np.array([1.0]), np.array([[0.5]]), np.zeros((1, 1)), P, alpha=0.9)
    assert out.z[0] == 1.0
    assert out.v[0] == pytest.approx(0.9 * 1.2 + 0.5 - 1.0)


def test_subthreshold():
    v = 1.0 - 1e-9
    out = lif_step(NetworkState(np.array([v]), np.zeros(1), np.zeros(1)), np.array([1.0]), np.array([[0.1]]),
                   np.zeros((1, 1)), P)
    assert out.z[0] == 0 and out.v[0] == pytest.approx(P.alpha * v + 0.1)


def test_shape_and_diagonal_errors():
    s = NetworkState.zeros(2, 1)
    with pytest.raises(ConfigurationError):
        lif_step(s, np.zeros(3), np.zeros((2, 2)), np.zeros((2, 2)), P)
    with pytest.raises(ConfigurationError):
        lif_step(s, np.zeros(2), np.zeros((2, 2)), np.eye(2), P)


def test_readout_examples():
    assert readout_step([1.5], [0, 0], [[1, 2]], P, kappa=1.0)[0] == 1.5
    assert readout_step([2.0], [1], [[1.0]], P, kappa=0.5)[0] == 2.0
    assert readout_step([0.0], [0, 1, 0], [[0, 0.7, 0]], P)[0] == pytest.approx(0.7)


def test_pseudo_derivative():
    assert pseudo_derivative(1.0, P) == pytest.approx(0.3)
    assert pseudo_derivative(0.0, P) == 0 and pseudo_derivative(2.0, P) == 0


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10))
def test_pseudo_derivative_support(v):
    psi = pseudo_derivative(v, P)
    if v <= 0 or v >= 2:
        assert psi == 0
    assert 0 <= psi <= 0.3


def test_run_lif_matches_step():
    rng = np.random.default_rng(0)
    x = (rng.random((40, 4)) < 0.3).astype(float)
    w_in = rng.normal(0, 0.8, (5, 4))
    w_rec = rng.normal(0, 0.3, (5, 5))
    np.fill_diagonal(w_rec, 0)
    v, z = run_lif(x, w_in, w_rec, P)
    s = NetworkState.zeros(5, 1)
    for t in range(40):
        assert np.allclose(s.v, v[t])
        s = lif_step(s, x[t], w_in, w_rec, P)
        assert np.array_equal(s.z, z[t])


def test_subtractive_reset():
    v, z = run_lif(np.zeros((2, 1)), np.zeros((1, 1)), np.zeros((1, 1)), P, v0=[1.5])
    assert z[0, 0] == 1 and v[1, 0] == pytest.approx(P.alpha * 1.5 - 1.0)


def test_leaky_filter():
    out = leaky_filter(np.array([1.0, 0.0, 1.0]), 0.5)
    assert np.allclose(out, [1.0, 0.5, 1.25])


def test_poisson():
    rng = np.random.default_rng(0)
    assert poisson_encode(0.0, 1.0, 1e-3, rng).sum() == 0
    with pytest.raises(ConfigurationError):
        poisson_encode(2000.0, 1.0, 1e-3, rng)
    train = poisson_encode(50.0, 100.0, 1e-3, rng)
    assert abs(train.sum() / 100.0 - 50) < 2
    k = int(train.sum())
    n = train.size
    expected = np.array([n * 0.05, n * 0.95])
    chi2 = stats.chisquare([k, n - k], expected)
    assert chi2.pvalue > 0.01


def test_delta_modulation():
    up, dn = delta_modulate(np.full(10, 3.0), 0.1)
    assert up.sum() == 0 and dn.sum() == 0
    up, dn = delta_modulate([0.0, 0.5, 1.0], 0.4)
    assert list(up) == [0, 1, 1] and dn.sum() == 0
    up, dn = delta_modulate(np.linspace(1.0, 0.0, 101), 0.25)
    assert dn.sum() == 4 and up.sum() == 0
    assert delta_modulate([], 0.5)[0].size == 0
    with pytest.raises(ConfigurationError):
        delta_modulate([1.0], 0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=2, max_size=8), st.floats(0.01, 100))
def test_classifier_scale_invariance(counts, scale):
    counts = np.array(counts, dtype=float)
    assert classify_counts(counts) == classify_counts(counts * scale)


def test_raster_roundtrip(tmp_path):
    z = (np.random.default_rng(1).random((30, 6)) < 0.2).astype(np.uint8)
    path = tmp_path / "raster.csv"
    write_raster_csv(path, z)
    assert np.array_equal(read_raster_csv(path, shape=z.shape), z)
