"""Transfer of accumulated gradients onto a :class:`CrossbarArray`.

All schemes take a gradient of shape ``(P, Q)`` in weight units and return the
:class:`Telemetry` delta of the call. A positive gradient means the weight has
to decrease, which is done by SET pulses on the negative polarity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .crossbar import GRANULARITY, NEG, POS, CrossbarArray, Telemetry
from .device import ConfigurationError

VARIANTS = ("sign_gd", "stochastic", "multi_memristor", "mixed_precision")


@dataclass(frozen=True)
class SchemeConfig:
    variant: str = "mixed_precision"
    theta: float = 0.0
    p: float = 1.0
    n: int = 1
    granularity: float = GRANULARITY
    lr: float = 1.0
    refresh: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.theta < 0:
            raise ConfigurationError("theta must be >= 0")
        if self.p <= 0:
            raise ConfigurationError("p must be > 0")
        if self.granularity <= 0:
            raise ConfigurationError("granularity must be > 0")
        if self.n < 1:
            raise ConfigurationError("n must be >= 1")


class PrecisionAccumulator:
    """High-precision residuals in µS for the mixed-precision scheme."""

    def __init__(self, shape):
        self.acc = np.zeros(shape)

    @property
    def shape(self):
        return self.acc.shape


def _check_grad(xbar, grad):
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (xbar.p, xbar.q):
        raise ConfigurationError(f"gradient shape {grad.shape} != {(xbar.p, xbar.q)}")
    return grad


def _snapshot(xbar):
    t = xbar.telemetry
    return Telemetry(t.sets, t.resets, t.refreshes)


def _delta(xbar, before):
    t = xbar.telemetry
    return Telemetry(t.sets - before.sets, t.resets - before.resets, t.refreshes - before.refreshes)


def _signed_pulses(counts, decrease):
    """Pulse tensor ``(2, P, Q)``: ``counts`` on G- where ``decrease`` else on G+."""
    counts = np.asarray(counts, dtype=np.int64)
    return np.stack([np.where(decrease, 0, counts), np.where(decrease, counts, 0)])


def _pulse(xbar, counts, decrease, cfg, t_now):
    active = counts > 0
    if cfg.refresh and active.any():
        xbar.refresh_where(t_now, active, cfg.granularity)
    xbar.apply_pulses(_signed_pulses(counts, decrease), t_now)


def apply_sign_gd(xbar: CrossbarArray, grad, cfg: SchemeConfig, t_now) -> Telemetry:
    grad = _check_grad(xbar, grad)
    before = _snapshot(xbar)
    counts = (np.abs(grad) > cfg.theta).astype(np.int64)
    _pulse(xbar, counts, grad > 0, cfg, t_now)
    return _delta(xbar, before)


def update_probability(grad, p):
    return np.minimum(1.0, np.abs(np.asarray(grad, dtype=float)) / p)


def apply_stochastic(xbar: CrossbarArray, grad, cfg: SchemeConfig, rng, t_now) -> Telemetry:
    """One pulse with probability ``min(1, |grad| / p)``; candidates are refreshed first."""
    grad = _check_grad(xbar, grad)
    rng = rng if rng is not None else xbar.rng
    before = _snapshot(xbar)
    counts = (rng.random(grad.shape) < update_probability(grad, cfg.p)).astype(np.int64)
    _pulse(xbar, counts, grad > 0, cfg, t_now)
    return _delta(xbar, before)


def multi_memristor_pulses(grad, cfg: SchemeConfig, beta):
    return np.rint(np.abs(cfg.lr * np.asarray(grad, dtype=float)) / beta / cfg.granularity).astype(np.int64)


def apply_multi_memristor(xbar: CrossbarArray, grad, cfg: SchemeConfig, t_now) -> Telemetry:
    """Pulses ``round(|lr*grad| / beta / granularity)`` dealt round-robin over the N devices."""
    grad = _check_grad(xbar, grad)
    before = _snapshot(xbar)
    _pulse(xbar, multi_memristor_pulses(grad, cfg, xbar.beta), grad > 0, cfg, t_now)
    return _delta(xbar, before)


def apply_mixed_precision(xbar: CrossbarArray, accumulator: PrecisionAccumulator, grad, cfg: SchemeConfig,
                          t_now) -> Telemetry:
    """Accumulate ``-lr*grad/beta`` (µS) and flush whole multiples of the granularity."""
    grad = _check_grad(xbar, grad)
    if accumulator.shape != grad.shape:
        raise ConfigurationError("accumulator shape does not match the crossbar")
    before = _snapshot(xbar)
    acc = accumulator.acc
    acc -= cfg.lr * grad / xbar.beta
    k = np.floor(np.abs(acc) / cfg.granularity).astype(np.int64)
    _pulse(xbar, k, acc < 0, cfg, t_now)
    acc -= np.sign(acc) * k * cfg.granularity
    return _delta(xbar, before)


def apply_update(xbar, grad, cfg: SchemeConfig, t_now, rng=None, accumulator=None) -> Telemetry:
    if cfg.variant == "sign_gd":
        return apply_sign_gd(xbar, grad, cfg, t_now)
    if cfg.variant == "stochastic":
        return apply_stochastic(xbar, grad, cfg, rng, t_now)
    if cfg.variant == "multi_memristor":
        return apply_multi_memristor(xbar, grad, cfg, t_now)
    if accumulator is None:
        raise ConfigurationError("mixed precision needs an accumulator")
    return apply_mixed_precision(xbar, accumulator, grad, cfg, t_now)


def update_ready_transfer(xbar: CrossbarArray, target_dg, t_now, granularity=GRANULARITY) -> Telemetry:
    """Apply a signed change of the normalized differential conductance (µS).

    If the polarity to be increased lacks headroom to ``g_max``, both polarities
    are reset and the new absolute difference is programmed from scratch.
    """
    target_dg = np.broadcast_to(np.asarray(target_dg, dtype=float), (xbar.p, xbar.q))
    before = _snapshot(xbar)
    n = xbar.n
    g = xbar.read_conductances(t_now)
    s_pos, s_neg = g[POS].sum(axis=0) / n, g[NEG].sum(axis=0) / n
    up = target_dg > 0
    active = target_dg != 0
    level = np.where(up, s_pos, s_neg)
    infeasible = active & (level + np.abs(target_dg) > xbar.params.g_max)

    direct = np.rint(n * np.abs(target_dg) / granularity).astype(np.int64)
    direct = np.where(active & ~infeasible, direct, 0)
    xbar.apply_pulses(_signed_pulses(direct, ~up), t_now)

    if infeasible.any():
        new_diff = s_pos - s_neg + target_dg
        xbar.reset_masked(np.broadcast_to(infeasible, xbar.shape), t_now)
        xbar.cursor[:, infeasible] = 0
        k = np.rint(n * np.maximum(np.abs(new_diff) - xbar.params.g_min, 0.0) / granularity).astype(np.int64)
        xbar.apply_pulses(_signed_pulses(np.where(infeasible, k, 0), new_diff < 0), t_now)
    return _delta(xbar, before)


def telemetry_json(records, path=None):
    """Serialize a list of per-epoch telemetry dicts (``{"epoch", "sets", ...}``)."""
    text = json.dumps(list(records), indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
