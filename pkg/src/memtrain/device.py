"""Statistical phase-change-memory cell model.

Conductances are in µS and times in seconds throughout. Every operation has
an array form (``*_array``) working on NumPy arrays of device state, used by
the crossbar, and a single-device form working on :class:`DeviceState`.
"""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

G_MIN = 0.1
G_MAX = 12.0


class ConfigurationError(ValueError):
    """Raised for inconsistent shapes or parameters."""


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-linear map defined by sorted ``(breakpoint, value)`` pairs.

    Values outside the breakpoint range are held at the end values.
    """

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or len(bp) == 0 or len(bp) != len(self.values):
            raise ConfigurationError("breakpoints and values must be equal-length 1-D sequences")
        if np.any(np.diff(bp) <= 0):
            raise ConfigurationError("breakpoints must be strictly increasing")

    def __call__(self, x):
        return np.interp(x, self.breakpoints, self.values)

    @classmethod
    def from_mapping(cls, d):
        return cls(tuple(float(b) for b in d["breakpoints"]), tuple(float(v) for v in d["values"]))

    def scaled(self, factor):
        return PiecewiseLinear(self.breakpoints, tuple(factor * v for v in self.values))


# Default calibration: ~0.75 µS per pulse mid-range, std 30% of the mean,
# read sigma linear in g with 0.4 µS at 12 µS.
_DEFAULT_WRITE_MEAN = PiecewiseLinear((0.0, 3.0, 6.0, 9.0, 12.0), (0.80, 0.78, 0.75, 0.68, 0.55))
_DEFAULT_WRITE_STD = _DEFAULT_WRITE_MEAN.scaled(0.3)
_DEFAULT_READ_NOISE = PiecewiseLinear((0.0, 12.0), (0.0, 0.4))


@dataclass(frozen=True)
class PcmModelParams:
    """Parameters of the stochastic PCM model.

    ``history_gain`` adds ``history_gain * p_mem`` to the mean increment, and
    ``p_mem`` decays by ``exp(-1 / history_decay)`` per SET pulse, so the
    first pulses after a RESET are slightly larger than later ones.
    """

    write_mean: PiecewiseLinear = _DEFAULT_WRITE_MEAN
    write_std: PiecewiseLinear = _DEFAULT_WRITE_STD
    read_noise: PiecewiseLinear = _DEFAULT_READ_NOISE
    nu: float = 0.05
    t0_ref: float = 25.0
    g_min: float = G_MIN
    g_max: float = G_MAX
    reset_mu: float = 0.1
    reset_sigma: float = 0.01
    history_gain: float = 0.1
    history_decay: float = 2.6

    def __post_init__(self):
        if self.nu < 0:
            raise ConfigurationError("nu must be >= 0")
        if self.t0_ref <= 0:
            raise ConfigurationError("t0_ref must be > 0")
        if self.g_min >= self.g_max:
            raise ConfigurationError("g_min must be < g_max")
        if np.any(np.asarray(self.write_mean.values) <= 0):
            raise ConfigurationError("write_mean must be positive everywhere")

    perf = False

    def without_read_noise(self) -> "PcmModelParams":
        return dataclasses.replace(self, read_noise=PiecewiseLinear((0.0, 1.0), (0.0, 0.0)))

    @classmethod
    def from_toml(cls, path: Union[str, Path]) -> "PcmModelParams":
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))

    @classmethod
    def from_dict(cls, d: dict) -> "PcmModelParams":
        kwargs = {}
        for section, name in (("write_mean", "write_mean"), ("write_std", "write_std"), ("read_noise", "read_noise")):
            if section in d:
                kwargs[name] = PiecewiseLinear.from_mapping(d[section])
        for key in ("nu", "t0_ref", "g_min", "g_max", "reset_mu", "reset_sigma", "history_gain", "history_decay"):
            if key in d:
                kwargs[key] = float(d[key])
        return cls(**kwargs)

    def to_toml(self) -> str:
        lines = []
        for key in ("nu", "t0_ref", "g_min", "g_max", "reset_mu", "reset_sigma", "history_gain", "history_decay"):
            lines.append(f"{key} = {getattr(self, key)!r}")
        for section in ("write_mean", "write_std", "read_noise"):
            table = getattr(self, section)
            lines.append("")
            lines.append(f"[{section}]")
            lines.append(f"breakpoints = {list(table.breakpoints)!r}")
            lines.append(f"values = {list(table.values)!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PerfModeParams:
    """Ideal quantized memory: deterministic SET increments of g_max / 2**cb_res."""

    cb_res: int = 4
    g_max: float = G_MAX
    g_min: float = G_MIN
    reset_mu: float = 0.1

    perf = True

    @property
    def increment(self) -> float:
        return self.g_max / 2 ** self.cb_res


DeviceParams = Union[PcmModelParams, PerfModeParams]


@dataclass(frozen=True)
class DeviceState:
    g: float = G_MIN
    t_p: float = 0.0
    count: int = 0
    p_mem: float = 1.0


# -- array operations -------------------------------------------------------

def reset_array(shape, params: DeviceParams, rng: np.random.Generator):
    """Fresh conductances for a RESET of ``shape`` devices."""
    if params.perf:
        return np.full(shape, params.reset_mu)
    g = rng.normal(params.reset_mu, params.reset_sigma, size=shape)
    return np.clip(g, params.g_min, params.g_max)


def set_pulse_array(g, p_mem, params: DeviceParams, rng: np.random.Generator):
    """Apply one SET pulse to every device in ``g``; returns ``(g, p_mem)``."""
    g = np.asarray(g, dtype=float)
    p_mem = np.asarray(p_mem, dtype=float)
    if params.perf:
        return np.minimum(g + params.increment, params.g_max), p_mem
    mean = params.write_mean(g) + params.history_gain * p_mem
    std = params.write_std(g)
    dg = np.maximum(mean + std * rng.standard_normal(g.shape), 0.0)
    g_new = np.clip(g + dg, params.g_min, params.g_max)
    return g_new, p_mem * math.exp(-1.0 / params.history_decay)


def drift_array(g, t_p, t_now, params: DeviceParams):
    """Noise-free drifted conductance; frozen for the first ``t0_ref`` seconds."""
    g = np.asarray(g, dtype=float)
    if params.perf or params.nu == 0:
        return g.copy()
    elapsed = np.asarray(t_now - np.asarray(t_p, dtype=float))
    ratio = np.maximum(elapsed / params.t0_ref, 1.0)
    return g * ratio ** (-params.nu)


def read_array(g, t_p, t_now, params: DeviceParams, rng: np.random.Generator):
    """Drifted conductance plus conductance-dependent read noise (clipped at 0)."""
    gd = drift_array(g, t_p, t_now, params)
    if params.perf:
        return gd
    sigma = params.read_noise(gd)
    if np.all(sigma == 0):
        return gd
    return np.maximum(gd + sigma * rng.standard_normal(gd.shape), 0.0)


# -- single-device operations -------------------------------------------------

def _check_time(device: DeviceState, t_now: float):
    if t_now < device.t_p:
        raise ConfigurationError(f"t_now={t_now} precedes last programming time {device.t_p}")


def reset(device: DeviceState, t_now: float, rng: np.random.Generator, params: DeviceParams = PcmModelParams()) -> DeviceState:
    _check_time(device, t_now)
    g = float(reset_array((), params, rng))
    return DeviceState(g=g, t_p=t_now, count=0, p_mem=1.0)


def set_pulse(device: DeviceState, t_now: float, rng: np.random.Generator, params: DeviceParams = PcmModelParams()) -> DeviceState:
    _check_time(device, t_now)
    g, p_mem = set_pulse_array(device.g, device.p_mem, params, rng)
    return DeviceState(g=float(g), t_p=t_now, count=device.count + 1, p_mem=float(p_mem))


def read(device: DeviceState, t_now: float, rng: np.random.Generator, params: DeviceParams = PcmModelParams()) -> float:
    _check_time(device, t_now)
    return float(read_array(device.g, device.t_p, t_now, params, rng))
