"""Discrete-time LIF recurrent layer, leaky readout and spike encoders."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .device import ConfigurationError


@dataclass(frozen=True)
class LifParams:
    dt: float = 1e-3
    tau_m: float = 30e-3
    v_th: float = 1.0
    tau_out: float = 30e-3
    gamma_pd: float = 0.3

    def __post_init__(self):
        if self.dt <= 0 or self.tau_m <= 0 or self.tau_out <= 0:
            raise ConfigurationError("time constants must be positive")
        if self.v_th <= 0:
            raise ConfigurationError("v_th must be positive")

    @property
    def alpha(self) -> float:
        return math.exp(-self.dt / self.tau_m)

    @property
    def kappa(self) -> float:
        return math.exp(-self.dt / self.tau_out)


@dataclass
class NetworkState:
    v: np.ndarray
    z: np.ndarray
    y: np.ndarray

    @classmethod
    def zeros(cls, n_rec, n_out):
        return cls(np.zeros(n_rec), np.zeros(n_rec), np.zeros(n_out))


def spikes(v, v_th):
    """Heaviside of ``(v - v_th) / v_th``, with H(0) = 1."""
    return (np.asarray(v) >= v_th).astype(float)


def lif_step(state: NetworkState, x_t, w_in, w_rec, params: LifParams, alpha=None) -> NetworkState:
    """Advance the recurrent layer by one step.

    ``z`` of the returned state is the spike vector emitted from the incoming
    voltages; ``v`` is the voltage for the next step. ``w_in`` is
    ``(n_rec, n_in)`` and ``w_rec`` is ``(n_rec, n_rec)`` with zero diagonal.
    """
    w_in = np.asarray(w_in)
    w_rec = np.asarray(w_rec)
    x_t = np.asarray(x_t, dtype=float)
    n_rec = state.v.shape[0]
    if w_rec.shape != (n_rec, n_rec) or w_in.shape != (n_rec, x_t.shape[0]):
        raise ConfigurationError(f"weight shapes {w_in.shape}, {w_rec.shape} incompatible with "
                                 f"{n_rec} neurons and {x_t.shape[0]} inputs")
    if np.any(np.diag(w_rec) != 0):
        raise ConfigurationError("recurrent weights must have a zero diagonal")
    a = params.alpha if alpha is None else alpha
    z = spikes(state.v, params.v_th)
    v_next = a * state.v + w_rec @ z + w_in @ x_t - z * params.v_th
    return NetworkState(v=v_next, z=z, y=state.y)


def readout_step(y, z, w_out, params: LifParams, kappa=None):
    """Leaky integrator readout ``y' = kappa * y + w_out @ z`` (``w_out`` is ``(n_out, n_rec)``)."""
    k = params.kappa if kappa is None else kappa
    return k * np.asarray(y, dtype=float) + np.asarray(w_out) @ np.asarray(z, dtype=float)


def pseudo_derivative(v, params: LifParams):
    """Triangular surrogate ``gamma/v_th * max(0, 1 - |v - v_th| / v_th)``."""
    v = np.asarray(v, dtype=float)
    return params.gamma_pd / params.v_th * np.maximum(0.0, 1.0 - np.abs(v - params.v_th) / params.v_th)


def run_lif(inputs, w_in, w_rec, params: LifParams, v0=None):
    """Simulate the recurrent layer over a whole input sequence.

    ``inputs`` is ``(T, n_in)``. Returns ``(v, z)`` each ``(T, n_rec)``, where
    ``v[t]`` is the voltage at step t and ``z[t] = H(v[t])``.
    """
    inputs = np.asarray(inputs, dtype=float)
    n_rec = w_rec.shape[0]
    drive = inputs @ np.asarray(w_in).T
    a, v_th = params.alpha, params.v_th
    T = inputs.shape[0]
    vs = np.empty((T, n_rec))
    zs = np.empty((T, n_rec))
    v = np.zeros(n_rec) if v0 is None else np.array(v0, dtype=float)
    for t in range(T):
        z = (v >= v_th).astype(float)
        vs[t] = v
        zs[t] = z
        v = a * v + drive[t] - z * v_th
        if z.any():
            v += w_rec @ z
    return vs, zs


def leaky_filter(x, decay, axis=0):
    """``out[t] = decay * out[t-1] + x[t]`` along ``axis`` with zero initial state."""
    from scipy.signal import lfilter

    return lfilter([1.0], [1.0, -decay], np.asarray(x, dtype=float), axis=axis)


def poisson_encode(rate, duration, dt, rng: np.random.Generator, n=None):
    """Bernoulli(rate*dt) spike train of ``round(duration/dt)`` steps.

    ``rate`` may be a scalar or an array of per-channel rates (Hz); the result
    has shape ``(T,)`` or ``(T, n_channels)``.
    """
    rate = np.asarray(rate, dtype=float)
    prob = rate * dt
    if np.any(prob > 1) or np.any(prob < 0):
        raise ConfigurationError("rate*dt must lie in [0, 1]")
    steps = int(round(duration / dt))
    shape = (steps,) + prob.shape if n is None else (steps, n)
    return (rng.random(shape) < prob).astype(np.uint8)


def delta_modulate(series, threshold):
    """Up/down event trains from a delta-modulation encoder.

    The reference starts at ``series[0]``; each time the signal moves by at
    least ``threshold`` from the reference an event is emitted and the
    reference jumps to the current value.
    """
    if threshold <= 0:
        raise ConfigurationError("threshold must be > 0")
    series = np.asarray(series, dtype=float)
    up = np.zeros(series.shape[0], dtype=np.uint8)
    dn = np.zeros(series.shape[0], dtype=np.uint8)
    if series.size == 0:
        return up, dn
    ref = series[0]
    for t in range(1, series.shape[0]):
        d = series[t] - ref
        if d >= threshold:
            up[t] = 1
            ref = series[t]
        elif d <= -threshold:
            dn[t] = 1
            ref = series[t]
    return up, dn


def classify_counts(counts):
    """Index of the maximal spike count along the last axis (first index wins ties)."""
    return np.argmax(np.asarray(counts), axis=-1)


def write_raster_csv(path, z, dt=None):
    """Write nonzero entries of a ``(T, n)`` spike raster as ``(t, neuron_id)`` rows."""
    t_idx, n_idx = np.nonzero(np.asarray(z))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "neuron_id"])
        for t, n in zip(t_idx, n_idx):
            w.writerow([t * dt if dt is not None else int(t), int(n)])


def read_raster_csv(path, shape=None, dt=None):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t = float(row["t"])
            rows.append((int(round(t / dt)) if dt is not None else int(t), int(row["neuron_id"])))
    if shape is None:
        shape = (1 + max(r[0] for r in rows), 1 + max(r[1] for r in rows)) if rows else (0, 0)
    z = np.zeros(shape, dtype=np.uint8)
    for t, n in rows:
        z[t, n] = 1
    return z
