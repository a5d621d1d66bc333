import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memtrain.crossbar import NEG, POS, CrossbarArray
from memtrain.device import ConfigurationError, PcmModelParams, PerfModeParams
from memtrain.updates import (
    PrecisionAccumulator, SchemeConfig, apply_mixed_precision, apply_multi_memristor, apply_sign_gd,
    apply_stochastic, apply_update, multi_memristor_pulses, telemetry_json, update_probability,
    update_ready_transfer,
)

PERF = PerfModeParams()


def perf_xbar(p=1, q=1, n=1):
    return CrossbarArray(p, q, n, params=PERF, rng=0)


def test_config_validation():
    for kw in ({"variant": "adam"}, {"theta": -1}, {"p": 0}, {"granularity": 0}, {"n": 0}):
        with pytest.raises(ConfigurationError):
            SchemeConfig(**kw)


def test_sign_gd():
    x = perf_xbar()
    cfg = SchemeConfig("sign_gd", theta=0.1)
    assert apply_sign_gd(x, np.zeros((1, 1)), cfg, 0.0).sets == 0
    tel = apply_sign_gd(x, np.array([[0.5]]), cfg, 0.0)
    assert tel.sets == 1 and x.count[NEG, 0, 0, 0] == 1 and x.count[POS, 0, 0, 0] == 0
    assert apply_sign_gd(x, np.array([[0.05]]), cfg, 0.0).sets == 0
    apply_sign_gd(x, np.array([[-0.5]]), cfg, 0.0)
    assert x.count[POS, 0, 0, 0] == 1


def test_stochastic_probability():
    assert update_probability(0.05, 0.1) == pytest.approx(0.5)
    assert update_probability(0.3, 0.1) == 1.0


def test_stochastic_counts():
    x = CrossbarArray(100, 100, 1, params=PERF, rng=1)
    tel = apply_stochastic(x, np.full((100, 100), 0.05), SchemeConfig("stochastic", p=0.1), np.random.default_rng(2), 0.0)
    assert 5000 - 150 <= tel.sets <= 5000 + 150
    assert x.count[POS].sum() == 0


def test_stochastic_refreshes_first():
    x = perf_xbar()
    x.g[POS] = 9.5
    x.g[NEG] = 7.0
    tel = apply_stochastic(x, np.array([[-1.0]]), SchemeConfig("stochastic", p=0.1), np.random.default_rng(0), 0.0)
    assert tel.refreshes == 1
    assert x.g[POS, 0, 0, 0] == pytest.approx(0.1 + 4 * 0.75)


def test_stochastic_expected_update_perf():
    x = CrossbarArray(200, 100, 1, params=PERF, rng=3)
    w0 = x.stored_weights()
    grad = np.full((200, 100), 0.02)
    apply_stochastic(x, grad, SchemeConfig("stochastic", p=0.1, refresh=False), np.random.default_rng(4), 0.0)
    dw = (x.stored_weights() - w0).mean()
    expected = -(0.75 * x.beta) * 0.02 / 0.1
    se = 0.75 * x.beta * np.sqrt(0.2 * 0.8 / grad.size)
    assert abs(dw - expected) < 3 * se


def test_multi_memristor_rounding():
    x = perf_xbar()
    cfg = SchemeConfig("multi_memristor", lr=1.0)
    assert multi_memristor_pulses(np.array([[1.6 * x.beta]]), cfg, x.beta)[0, 0] == 2
    assert multi_memristor_pulses(np.array([[0.3 * x.beta]]), cfg, x.beta)[0, 0] == 0


def test_multi_memristor_circular_queue():
    x = perf_xbar(n=4)
    cfg = SchemeConfig("multi_memristor", lr=1.0, n=4)
    apply_multi_memristor(x, np.array([[-6 * 0.75 * x.beta]]), cfg, 0.0)
    assert list(x.count[POS, :, 0, 0]) == [2, 2, 1, 1]


def test_mixed_precision_examples():
    x = perf_xbar()
    acc = PrecisionAccumulator((1, 1))
    cfg = SchemeConfig("mixed_precision", lr=1.0)
    tel = apply_mixed_precision(x, acc, np.array([[-1.9 * x.beta]]), cfg, 0.0)
    assert tel.sets == 2 and x.count[POS].sum() == 2
    assert acc.acc[0, 0] == pytest.approx(0.4)

    x = perf_xbar()
    acc = PrecisionAccumulator((1, 1))
    fired = []
    for _ in range(4):
        fired.append(apply_mixed_precision(x, acc, np.array([[-0.4 * x.beta]]), cfg, 0.0).sets)
    assert fired == [0, 1, 0, 1]
    assert acc.acc[0, 0] == pytest.approx(0.1)

    x = perf_xbar()
    acc = PrecisionAccumulator((1, 1))
    for _ in range(5):
        assert apply_mixed_precision(x, acc, np.zeros((1, 1)), cfg, 0.0).sets == 0
    assert acc.acc[0, 0] == 0


def test_mixed_precision_shape_check():
    with pytest.raises(ConfigurationError):
        apply_mixed_precision(perf_xbar(), PrecisionAccumulator((2, 2)), np.zeros((1, 1)), SchemeConfig(), 0.0)
    with pytest.raises(ConfigurationError):
        apply_update(perf_xbar(), np.zeros((1, 1)), SchemeConfig(), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.01, 2.0))
def test_mixed_precision_residual_bound(seed, lr):
    rng = np.random.default_rng(seed)
    x = CrossbarArray(4, 5, 2, rng=seed)
    acc = PrecisionAccumulator((4, 5))
    cfg = SchemeConfig("mixed_precision", lr=lr, n=2)
    for t in range(15):
        apply_mixed_precision(x, acc, rng.normal(0, 0.05, (4, 5)), cfg, float(t))
        assert np.all(np.abs(acc.acc) < 0.75)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from(["sign_gd", "stochastic", "multi_memristor", "mixed_precision"]),
       st.sampled_from([1, 4]), st.booleans())
def test_pulse_conservation(seed, variant, n, perf):
    rng = np.random.default_rng(seed)
    x = CrossbarArray(3, 4, n, params=PERF if perf else PcmModelParams(), rng=seed)
    acc = PrecisionAccumulator((3, 4))
    cfg = SchemeConfig(variant, theta=0.01, p=0.05, n=n, lr=0.5)
    total_sets = total_resets = 0
    for t in range(20):
        grad = rng.normal(0, 0.1, (3, 4))
        if rng.random() < 0.2:
            tel = update_ready_transfer(x, rng.normal(0, 3, (3, 4)), float(t))
        else:
            tel = apply_update(x, grad, cfg, float(t), rng=rng, accumulator=acc)
        total_sets += tel.sets
        total_resets += tel.resets
    assert total_sets == x.total_sets.sum() == x.telemetry.sets
    assert total_resets == x.total_resets.sum() == x.telemetry.resets


def test_sign_gd_leaves_accumulator():
    acc = PrecisionAccumulator((1, 1))
    acc.acc[:] = 0.3
    apply_update(perf_xbar(), np.array([[1.0]]), SchemeConfig("sign_gd"), 0.0, accumulator=acc)
    assert acc.acc[0, 0] == 0.3


def test_update_ready_infeasible():
    x = perf_xbar()
    x.g[POS] = 8.0
    x.g[NEG] = 4.0
    tel = update_ready_transfer(x, 6.0, 0.0)
    assert tel.resets == 2 and tel.sets == 13
    assert x.g[POS, 0, 0, 0] == pytest.approx(0.1 + 13 * 0.75)
    assert x.g[NEG, 0, 0, 0] == 0.1


def test_update_ready_feasible_and_noop():
    x = perf_xbar()
    x.g[POS] = 5.0
    assert update_ready_transfer(x, 0.75, 0.0).sets == 1
    assert x.g[POS, 0, 0, 0] == pytest.approx(5.75)
    tel = update_ready_transfer(x, 0.0, 0.0)
    assert tel.sets == 0 and tel.resets == 0


def test_telemetry_json(tmp_path):
    recs = [{"epoch": 0, "sets": 3, "resets": 0, "refreshes": 0}]
    path = tmp_path / "tel.json"
    telemetry_json(recs, path)
    assert json.loads(path.read_text()) == recs
