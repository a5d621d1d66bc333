"""e-prop for LIF recurrent networks with a leaky readout.

Gradients use the weight-matrix layout of :mod:`memtrain.snn`: ``grad_in`` is
``(n_rec, n_in)``, ``grad_rec`` is ``(n_rec, n_rec)`` and ``grad_out`` is
``(n_out, n_rec)``. The eligibility of synapse ``(j, i)`` is
``psi_j * zbar_i`` where ``zbar`` is the alpha-filtered presynaptic activity
that reached the membrane up to the current step.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .device import ConfigurationError
from .snn import LifParams, leaky_filter, pseudo_derivative


def trace_step(z_bar, presyn_activity, alpha):
    return alpha * np.asarray(z_bar, dtype=float) + np.asarray(presyn_activity, dtype=float)


def eligibility(z_bar, psi):
    """Outer product ``e[j, i] = psi[j] * z_bar[i]`` (scalars allowed)."""
    z_bar = np.asarray(z_bar, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if z_bar.ndim == 0 or psi.ndim == 0:
        return psi * z_bar
    return np.outer(psi, z_bar)


def learning_signal(y, y_star, b_out):
    """``L = B (y - y*)``; ``b_out`` is ``(n_rec, n_out)``."""
    err = np.asarray(y, dtype=float) - np.asarray(y_star, dtype=float)
    b_out = np.asarray(b_out, dtype=float)
    if b_out.shape[-1] != err.shape[-1]:
        raise ConfigurationError(f"feedback matrix {b_out.shape} incompatible with {err.shape[-1]} outputs")
    return err @ b_out.T


def stop_learning_gate(errors, delta_th):
    return np.abs(np.asarray(errors, dtype=float)) > delta_th


def firing_rate_regularizer(spike_counts, duration, f_target=10.0, lambda_f=0.0):
    """Per-neuron addend ``lambda_f * (f - f_target)`` for the learning signal."""
    if duration <= 0:
        raise ConfigurationError("duration must be > 0")
    f = np.asarray(spike_counts, dtype=float) / duration
    return lambda_f * (f - f_target)


class FeedbackMatrix:
    """Fixed random (``N(0, 1/n_rec)``) or symmetric (``w_out.T``) feedback."""

    def __init__(self, n_rec, n_out, mode="random", rng=None):
        if mode not in ("random", "symmetric"):
            raise ConfigurationError(f"unknown feedback mode {mode!r}")
        self.mode = mode
        self.n_rec, self.n_out = n_rec, n_out
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self._b = rng.normal(0.0, 1.0 / np.sqrt(n_rec), size=(n_rec, n_out))

    def matrix(self, w_out=None):
        if self.mode == "symmetric":
            if w_out is None:
                raise ConfigurationError("symmetric feedback needs the current w_out")
            return np.asarray(w_out, dtype=float).T
        return self._b


@dataclass
class EligibilityStore:
    """Online (per-step) e-prop state and gradient accumulators."""

    n_in: int
    n_rec: int
    n_out: int
    z_bar_in: np.ndarray = field(init=False)
    z_bar_rec: np.ndarray = field(init=False)
    z_bar_out: np.ndarray = field(init=False)
    grad_in: np.ndarray = field(init=False)
    grad_rec: np.ndarray = field(init=False)
    grad_out: np.ndarray = field(init=False)

    def __post_init__(self):
        self.z_bar_in = np.zeros(self.n_in)
        self.z_bar_rec = np.zeros(self.n_rec)
        self.z_bar_out = np.zeros(self.n_rec)
        self.reset_gradients()

    def reset_gradients(self):
        self.grad_in = np.zeros((self.n_rec, self.n_in))
        self.grad_rec = np.zeros((self.n_rec, self.n_rec))
        self.grad_out = np.zeros((self.n_out, self.n_rec))

    def reset_traces(self):
        self.z_bar_in[:] = 0
        self.z_bar_rec[:] = 0
        self.z_bar_out[:] = 0

    def step(self, x_prev, z_prev, z_now, v_now, y_err, b_out, params: LifParams, gate=None, reg=None):
        """One step of trace filtering and gradient accumulation.

        ``x_prev``/``z_prev`` are the input and recurrent spikes that drove the
        transition into ``v_now``; ``z_now`` are the spikes emitted at ``v_now``
        and ``y_err`` the readout error at this step.
        """
        a, k = params.alpha, params.kappa
        self.z_bar_in = trace_step(self.z_bar_in, x_prev, a)
        self.z_bar_rec = trace_step(self.z_bar_rec, z_prev, a)
        self.z_bar_out = trace_step(self.z_bar_out, z_now, k)
        y_err = np.asarray(y_err, dtype=float)
        if gate is not None:
            y_err = np.where(gate, y_err, 0.0)
        L = y_err @ np.asarray(b_out).T
        if reg is not None:
            L = L + reg
        psi = pseudo_derivative(v_now, params)
        accumulate_gradients(self, L, eligibility(self.z_bar_in, psi), eligibility(self.z_bar_rec, psi),
                             y_err, self.z_bar_out)
        return self

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["matrix", "row", "col", "value"])
            for name in ("grad_in", "grad_rec", "grad_out"):
                m = getattr(self, name)
                for (r, c), val in np.ndenumerate(m):
                    w.writerow([name, r, c, repr(float(val))])


def accumulate_gradients(store: EligibilityStore, L, e_in, e_rec, y_err, z_bar_out):
    """Add ``L_j * e_ji`` to the input/recurrent accumulators and ``y_err ⊗ z_bar_out`` to the readout one."""
    L = np.asarray(L, dtype=float)[:, None]
    store.grad_in += L * e_in
    store.grad_rec += L * e_rec
    np.fill_diagonal(store.grad_rec, 0.0)
    store.grad_out += np.outer(y_err, z_bar_out)
    return store


def _shift(x):
    out = np.zeros_like(x)
    out[1:] = x[:-1]
    return out


def epoch_gradients(x, v, z, y, y_star, b_out, params: LifParams, delta_th=None,
                    rate_reg=None, filter_learning_signal=False):
    """Gradients summed over a whole sequence, vectorized over time.

    Equivalent to calling :meth:`EligibilityStore.step` once per step.
    ``x`` is ``(T, n_in)``, ``v``/``z`` are ``(T, n_rec)`` as returned by
    :func:`memtrain.snn.run_lif` and ``y``/``y_star`` are ``(T, n_out)``.
    ``rate_reg`` is a per-neuron addend to the learning signal. With
    ``filter_learning_signal`` the eligibility is additionally low-passed with
    the readout constant, which accounts for the readout's memory of past spikes.

    Returns ``(grad_in, grad_rec, grad_out)``.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    err = np.asarray(y, dtype=float) - np.asarray(y_star, dtype=float)
    if delta_th is not None:
        err = np.where(stop_learning_gate(err, delta_th), err, 0.0)
    a, k = params.alpha, params.kappa
    zbar_in = leaky_filter(_shift(x), a)
    zbar_rec = leaky_filter(_shift(z), a)
    zbar_out = leaky_filter(z, k)
    L = err @ np.asarray(b_out, dtype=float).T
    if rate_reg is not None:
        L = L + np.asarray(rate_reg, dtype=float)
    if filter_learning_signal:
        # sum_t L[t] * sum_{s<=t} k^(t-s) e[s] == sum_s e[s] * (reverse-time filter of L)[s]
        L = leaky_filter(L[::-1], k)[::-1]
    w = pseudo_derivative(v, params) * L
    grad_in = w.T @ zbar_in
    grad_rec = w.T @ zbar_rec
    np.fill_diagonal(grad_rec, 0.0)
    grad_out = err.T @ zbar_out
    return grad_in, grad_rec, grad_out
