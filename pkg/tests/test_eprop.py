import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memtrain.device import ConfigurationError
from memtrain.eprop import (
    EligibilityStore, FeedbackMatrix, accumulate_gradients, eligibility, epoch_gradients,
    firing_rate_regularizer, learning_signal, stop_learning_gate, trace_step,
)
from memtrain.snn import LifParams, leaky_filter, pseudo_derivative, run_lif

P = LifParams()


def test_trace_step_examples():
    zb, out = 0.0, []
    for x in (1, 0, 1):
        zb = trace_step(zb, x, 0.5)
        out.append(zb)
    assert out == [1.0, 0.5, 1.25]
    assert trace_step(np.array([2.0]), [0.0], 0.5)[0] == 1.0
    assert trace_step(np.array([2.0]), [3.0], 0.0)[0] == 3.0


def test_eligibility_examples():
    assert eligibility(1.25, 0.3) == pytest.approx(0.375)
    assert not eligibility(np.ones(3), np.zeros(2)).any()


def test_learning_signal():
    b = FeedbackMatrix(4, 2, rng=0).matrix()
    y = np.array([0.3, -0.2])
    assert not learning_signal(y, y, b).any()
    assert np.allclose(learning_signal([1.0, 2.0], [0.5, 0.5], np.eye(2)), [0.5, 1.5])
    l1 = learning_signal(y, np.zeros(2), b)
    assert np.array_equal(learning_signal(2 * y, np.zeros(2), b), 2 * l1)
    with pytest.raises(ConfigurationError):
        learning_signal(y, y, np.ones((4, 3)))


def test_feedback_modes():
    fb = FeedbackMatrix(100, 1, rng=0)
    assert fb.matrix().shape == (100, 1)
    assert abs(fb.matrix().std() - 0.1) < 0.03
    assert np.array_equal(fb.matrix(), fb.matrix())
    sym = FeedbackMatrix(3, 2, "symmetric")
    w_out = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(sym.matrix(w_out), w_out.T)
    with pytest.raises(ConfigurationError):
        FeedbackMatrix(3, 2, "bogus")


def test_accumulate():
    st_ = EligibilityStore(2, 2, 1)
    accumulate_gradients(st_, np.zeros(2), np.ones((2, 2)), np.ones((2, 2)), np.zeros(1), np.zeros(2))
    assert not st_.grad_in.any() and not st_.grad_rec.any()
    accumulate_gradients(st_, np.array([1.0, 0.0]), np.full((2, 2), 0.5), np.zeros((2, 2)), np.zeros(1), np.zeros(2))
    assert st_.grad_in[0, 1] == 0.5 and st_.grad_in[1, 0] == 0


def test_gate_and_regularizer():
    assert not stop_learning_gate([0.01, -0.02], 0.05).any()
    assert stop_learning_gate([0.0, 1e-9], 0.0).tolist() == [False, True]
    assert stop_learning_gate([0.1, -0.01, -0.2], 0.05).tolist() == [True, False, True]
    assert firing_rate_regularizer([10], 1.0, 10.0, 1.0)[0] == 0
    assert firing_rate_regularizer([20], 1.0, 10.0, 1.0)[0] == 10
    assert firing_rate_regularizer([20], 1.0, 10.0, 0.0)[0] == 0
    with pytest.raises(ConfigurationError):
        firing_rate_regularizer([1], 0.0)


def _toy(seed, T=20, n_in=3, n_rec=3, n_out=2):
    rng = np.random.default_rng(seed)
    x = (rng.random((T, n_in)) < 0.4).astype(float)
    w_in = rng.normal(0.4, 0.6, (n_rec, n_in))
    w_rec = rng.normal(0, 0.5, (n_rec, n_rec))
    np.fill_diagonal(w_rec, 0)
    w_out = rng.normal(0, 1, (n_out, n_rec))
    v, z = run_lif(x, w_in, w_rec, P)
    y = leaky_filter(z @ w_out.T, P.kappa)
    y_star = rng.normal(0, 1, (T, n_out))
    return x, v, z, y, y_star, w_in, w_rec, w_out, rng


@pytest.mark.parametrize("seed", range(5))
def test_eligibility_matches_unrolled(seed):
    x, v, z, *_ = _toy(seed)
    T = x.shape[0]
    st_ = EligibilityStore(3, 3, 2)
    for t in range(T):
        st_.step(x[t - 1] if t else np.zeros(3), z[t - 1] if t else np.zeros(3), z[t], v[t],
                 np.zeros(2), np.zeros((3, 2)), P)
        psi = pseudo_derivative(v[t], P)
        unrolled = sum(P.alpha ** (t - 1 - s) * x[s] for s in range(t)) if t else np.zeros(3)
        assert np.allclose(eligibility(st_.z_bar_in, psi), np.outer(psi, unrolled), atol=1e-10, rtol=0)


@pytest.mark.parametrize("seed", range(5))
def test_online_equals_vectorized(seed):
    x, v, z, y, y_star, *_ , rng = _toy(seed)
    b = rng.normal(0, 1, (3, 2))
    reg = np.array([0.1, -0.2, 0.05])
    st_ = EligibilityStore(3, 3, 2)
    for t in range(x.shape[0]):
        st_.step(x[t - 1] if t else np.zeros(3), z[t - 1] if t else np.zeros(3), z[t], v[t],
                 y[t] - y_star[t], b, P, gate=stop_learning_gate(y[t] - y_star[t], 0.3), reg=reg)
    g_in, g_rec, g_out = epoch_gradients(x, v, z, y, y_star, b, P, delta_th=0.3, rate_reg=reg)
    assert np.allclose(g_in, st_.grad_in, atol=1e-10)
    assert np.allclose(g_rec, st_.grad_rec, atol=1e-10)
    assert np.allclose(g_out, st_.grad_out, atol=1e-10)


def test_filtered_learning_signal_equivalence():
    x, v, z, y, y_star, *_ , rng = _toy(7)
    b = rng.normal(0, 1, (3, 2))
    g_f, _, _ = epoch_gradients(x, v, z, y, y_star, b, P, filter_learning_signal=True)
    # brute force: sum_t L[t] * sum_{s<=t} kappa^(t-s) e[s]
    zbar = leaky_filter(np.vstack([np.zeros((1, 3)), x[:-1]]), P.alpha)
    psi = pseudo_derivative(v, P)
    L = (y - y_star) @ b.T
    ref = np.zeros((3, 3))
    for t in range(x.shape[0]):
        for s in range(t + 1):
            ref += P.kappa ** (t - s) * L[t][:, None] * np.outer(psi[s], zbar[s])
    assert np.allclose(g_f, ref, atol=1e-10)


def test_output_gradient_finite_difference():
    rng = np.random.default_rng(3)
    x = (rng.random((50, 2)) < 0.5).astype(float)
    w_in = np.array([[0.8, 0.6]])
    w_rec = np.zeros((1, 1))
    v, z = run_lif(x, w_in, w_rec, P)
    y_star = np.sin(np.arange(50) / 5.0)[:, None]

    def loss(w):
        y = leaky_filter(z @ np.array([[w]]).T, P.kappa)
        return 0.5 * np.sum((y - y_star) ** 2)

    w0 = 0.37
    y = leaky_filter(z * w0, P.kappa)
    _, _, g_out = epoch_gradients(x, v, z, y, y_star, np.ones((1, 1)), P)
    h = 1e-5
    fd = (loss(w0 + h) - loss(w0 - h)) / (2 * h)
    assert abs(g_out[0, 0] - fd) / abs(fd) < 1e-4


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_zero_error_fixpoint(seed):
    x, v, z, y, *_ , rng = _toy(seed)
    grads = epoch_gradients(x, v, z, y, y, rng.normal(size=(3, 2)), P)
    assert all(not g.any() for g in grads)


def test_gradient_csv(tmp_path):
    st_ = EligibilityStore(2, 2, 1)
    st_.grad_in[:] = 1.5
    path = tmp_path / "g.csv"
    st_.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "matrix,row,col,value" and len(lines) == 1 + 4 + 4 + 2
