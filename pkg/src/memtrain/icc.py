"""Compliance-current (I_CC) programming models and the dual-memristor Delta rule."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .device import ConfigurationError


class RangeError(ValueError):
    """Input outside the measured/valid range of a model."""


@dataclass(frozen=True)
class PowerLawIccModel:
    """RRAM HCS median conductance as a power law of I_CC.

    ``G = A * I**m`` through (i_min, g_at_min) and (i_max, g_at_max); currents
    in µA, conductances in µS. ``sigma_frac`` is either a constant relative
    standard deviation or a callable of I_CC.
    """

    i_min: float = 10.0
    i_max: float = 400.0
    g_at_min: float = 20.0
    g_at_max: float = 500.0
    sigma_frac: Union[float, Callable] = 0.3
    floor: float = 1e-3

    @property
    def exponent(self) -> float:
        return math.log(self.g_at_max / self.g_at_min) / math.log(self.i_max / self.i_min)

    @property
    def prefactor(self) -> float:
        return self.g_at_min / self.i_min ** self.exponent

    def _check(self, i_cc):
        i_cc = np.asarray(i_cc, dtype=float)
        if np.any(i_cc < self.i_min) or np.any(i_cc > self.i_max) or np.any(~np.isfinite(i_cc)):
            raise RangeError(f"I_CC outside measured range [{self.i_min}, {self.i_max}] µA")
        return i_cc

    def _rel_sigma(self, i_cc):
        return self.sigma_frac(i_cc) if callable(self.sigma_frac) else self.sigma_frac

    def mean(self, i_cc):
        i_cc = self._check(i_cc)
        # exact at both endpoints: interpolate in log space from i_min
        log_ratio = np.log(i_cc / self.i_min) / math.log(self.i_max / self.i_min)
        g = self.g_at_min * np.exp(log_ratio * math.log(self.g_at_max / self.g_at_min))
        return g if g.ndim else float(g)

    def sample(self, i_cc, rng: np.random.Generator):
        mu = np.asarray(self.mean(i_cc))
        sigma = np.asarray(self._rel_sigma(np.asarray(i_cc, dtype=float))) * mu
        g = np.maximum(mu + sigma * rng.standard_normal(mu.shape), self.floor)
        return g if g.ndim else float(g)

    def inverse(self, g):
        """I_CC whose median conductance is ``g``; clipped to the measured range."""
        g = np.clip(np.asarray(g, dtype=float), self.g_at_min, self.g_at_max)
        i = self.i_min * np.exp(np.log(g / self.g_at_min) / self.exponent)
        return i if i.ndim else float(i)


def powerlaw_mean(i_cc, model: PowerLawIccModel = PowerLawIccModel()):
    return model.mean(i_cc)


def powerlaw_sample(i_cc, rng, model: PowerLawIccModel = PowerLawIccModel()):
    return model.sample(i_cc, rng)


GMAX_READOUT = 0.35e-3  # S
GMAX_METHODS = 3.5e-3  # S


@dataclass(frozen=True)
class LinearIccModel:
    """Perovskite drift-mode I_CC -> conductance relation (SI units: S and A).

    The mean is ``mu_slope * I + mu_intercept``; the target mapping uses
    ``(G + inverse_intercept) / mu_slope``. The two printed intercepts differ,
    which leaves a constant offset ``forward(inverse(G)) - G``.

    The sigma constants are kept raw: ``sigma = sigma_slope * I[mA] +
    sigma_intercept`` in µS.
    """

    mu_slope: float = 3.338
    mu_intercept: float = -1.294e-5
    sigma_slope: float = 7.040
    sigma_intercept: float = 3.0585
    inverse_intercept: float = 1.249e-5
    g_min: float = 0.1e-3
    g_max: float = GMAX_READOUT

    def mean(self, i_cc):
        return self.mu_slope * np.asarray(i_cc, dtype=float) + self.mu_intercept

    def sigma(self, i_cc):
        i_ma = np.asarray(i_cc, dtype=float) * 1e3
        return (self.sigma_slope * i_ma + self.sigma_intercept) * 1e-6

    def target_icc(self, g_target):
        g = np.asarray(g_target, dtype=float)
        tol = 1e-15
        if np.any(g < self.g_min - tol) or np.any(g > self.g_max + tol):
            raise RangeError(f"target conductance outside [{self.g_min}, {self.g_max}] S")
        i = (g + self.inverse_intercept) / self.mu_slope
        return i if i.ndim else float(i)

    @property
    def roundtrip_offset(self) -> float:
        return self.inverse_intercept + self.mu_intercept

    def sample(self, i_cc, rng: np.random.Generator, floor=1e-9):
        mu = np.asarray(self.mean(i_cc))
        g = np.maximum(mu + self.sigma(i_cc) * rng.standard_normal(mu.shape), floor)
        return g if g.ndim else float(g)


def linear_target_icc(g_target, model: LinearIccModel = LinearIccModel()):
    return model.target_icc(g_target)


@dataclass(frozen=True)
class DeltaRuleConfig:
    eta: float = 1.0
    delta_th: float = 0.0
    c1: float = 1.0
    c2: float = 1.0
    icc_min: float = -math.inf
    icc_max: float = math.inf

    def __post_init__(self):
        if self.eta <= 0:
            raise ConfigurationError("eta must be > 0")
        if self.delta_th < 0:
            raise ConfigurationError("delta_th must be >= 0")


@dataclass(frozen=True)
class IccUpdate:
    icc1: float
    icc2: float
    clipped: bool = False


def delta_rule_step(w1_current, w2_current, error, config: DeltaRuleConfig) -> Optional[IccUpdate]:
    """Compliance currents for one push-pull Delta-rule update of a device pair.

    Returns ``None`` inside the stop-learning band ``|error| <= delta_th``.
    For a positive error device 1 is pushed up and device 2 pulled down; the
    roles swap for a negative error. Currents outside ``[icc_min, icc_max]``
    are clipped and flagged.
    """
    if not all(math.isfinite(v) for v in (w1_current, w2_current, error)):
        raise ConfigurationError("inputs must be finite")
    if abs(error) <= config.delta_th:
        return None
    step = config.eta * abs(error)
    sign = 1.0 if error > 0 else -1.0
    s1 = config.c1 * w1_current + sign * step
    s2 = config.c1 * w2_current - sign * step
    icc1, icc2 = s1 * config.c2, s2 * config.c2
    c1 = min(max(icc1, config.icc_min), config.icc_max)
    c2 = min(max(icc2, config.icc_min), config.icc_max)
    return IccUpdate(c1, c2, clipped=(c1 != icc1 or c2 != icc2))


def delta_rule_currents(w1_current, w2_current, error, config: DeltaRuleConfig):
    """Vectorized :func:`delta_rule_step` over arrays.

    Returns ``(icc1, icc2, update_mask)``; entries outside the mask keep the
    input currents.
    """
    w1 = np.asarray(w1_current, dtype=float)
    w2 = np.asarray(w2_current, dtype=float)
    err = np.broadcast_to(np.asarray(error, dtype=float), np.broadcast_shapes(w1.shape, w2.shape, np.shape(error)))
    upd = np.abs(err) > config.delta_th
    signed = config.eta * err
    icc1 = np.clip((config.c1 * w1 + signed) * config.c2, config.icc_min, config.icc_max)
    icc2 = np.clip((config.c1 * w2 - signed) * config.c2, config.icc_min, config.icc_max)
    return np.where(upd, icc1, w1), np.where(upd, icc2, w2), upd
