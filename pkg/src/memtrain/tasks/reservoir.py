"""Firing-pattern classification with a volatile-memristor reservoir.

A single volatile node is driven by the spike train (each spike is a voltage
pulse); sampling its state every ``sample_dt`` gives the virtual nodes. A
sigmoid readout is trained either in float or on differential device pairs
programmed through the linear I_CC model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.metrics import confusion_matrix

from ..device import ConfigurationError
from ..icc import LinearIccModel

CLASSES = ("bursting", "adapting", "tonic", "irregular")
PATTERN_LENGTH = 1.050  # s


def _bursting(rng, length):
    n_groups = int(rng.integers(4, 6))
    t = 0.0
    out = []
    for g in range(n_groups):
        out.extend(t + 0.005 * np.arange(4))
        t = out[-1] + rng.uniform(0.075, 0.125)
    return [s for s in out if s < length]


def _adapting(rng, length):
    t = 0.0
    isi = 0.005
    out = []
    while t < length:
        out.append(t)
        t += isi
        isi *= 1.5 * (1.0 + 0.05 * rng.standard_normal())
    return out


def _tonic(rng, length):
    t = 0.0
    out = []
    while t < length:
        out.append(t)
        t += 0.070 * (1.0 + 0.05 * rng.standard_normal())
    return out


def _irregular(rng, length, segment=0.060):
    starts = np.arange(0.0, length, segment)
    fire = rng.random(len(starts)) < 0.5
    return [s + rng.uniform(0.0, segment) for s in starts[fire] if s < length]


_GENERATORS = {"bursting": _bursting, "adapting": _adapting, "tonic": _tonic, "irregular": _irregular}


def generate_firing_patterns(cls, rng, length=PATTERN_LENGTH):
    """Sorted spike times (s) of one pattern of class ``cls``."""
    if cls not in _GENERATORS:
        raise ConfigurationError(f"unknown class {cls!r}; expected one of {CLASSES}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    times = np.sort(np.asarray(_GENERATORS[cls](rng, length), dtype=float))
    return times[(times >= 0) & (times < length)]


def make_dataset(n_per_class, seed=0, length=PATTERN_LENGTH):
    """List of spike-time arrays and integer labels, classes interleaved."""
    rng = np.random.default_rng([seed, 2])
    trains, labels = [], []
    for _ in range(n_per_class):
        for k, cls in enumerate(CLASSES):
            trains.append(generate_firing_patterns(cls, rng, length))
            labels.append(k)
    return trains, np.asarray(labels)


@dataclass(frozen=True)
class VolatileNodeParams:
    tau_r: float = 10e-3
    gain: float = 0.35  # state increment per ms of a unit-amplitude pulse at rest
    s_max: float = 1.0
    amplitude: float = 1.0
    width: float = 25e-3
    device_var: float = 0.05
    cycle_var: float = 0.02
    dt: float = 1e-3

    def __post_init__(self):
        if self.tau_r <= 0 or self.dt <= 0 or self.width <= 0 or self.s_max <= 0:
            raise ConfigurationError("tau_r, dt, width and s_max must be positive")


def node_response(spike_times, params: VolatileNodeParams, rng=None, length=PATTERN_LENGTH, gain_scale=1.0):
    """State trace of the volatile node, one value per ``dt``.

    While a pulse is applied the state grows by ``gain*amplitude*(1 - s/s_max)``
    per ms (saturating); it always relaxes with ``tau_r``.
    """
    n = int(round(length / params.dt))
    drive = np.zeros(n)
    w = int(round(params.width / params.dt))
    for t in spike_times:
        k = int(t / params.dt)
        drive[k:k + w] = params.amplitude
    decay = np.exp(-params.dt / params.tau_r)
    inc = params.gain * gain_scale * params.dt / 1e-3
    noise = rng.standard_normal(n) * params.cycle_var if rng is not None and params.cycle_var else np.zeros(n)
    s = 0.0
    out = np.empty(n)
    for k in range(n):
        s = s * decay + inc * drive[k] * (1.0 + noise[k]) * (1.0 - s / params.s_max)
        out[k] = s
    return out


class VirtualNodeReservoir(BaseEstimator, TransformerMixin):
    """Sample the volatile node every ``sample_dt`` to give ``n_nodes`` features."""

    def __init__(self, n_nodes=30, sample_dt=35e-3, params=None, random_state=None):
        self.n_nodes = n_nodes
        self.sample_dt = sample_dt
        self.params = params
        self.random_state = random_state

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        p = self.params or VolatileNodeParams()
        rng = np.random.default_rng(self.random_state)
        step = int(round(self.sample_dt / p.dt))
        length = self.n_nodes * self.sample_dt
        feats = np.empty((len(X), self.n_nodes))
        for i, train in enumerate(X):
            scale = 1.0 + p.device_var * rng.standard_normal() if p.device_var else 1.0
            trace = node_response(train, p, rng, length, scale)
            feats[i] = trace[step - 1::step][:self.n_nodes]
        return feats


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class SigmoidReadout(BaseEstimator, ClassifierMixin):
    """Single-layer sigmoid readout (features + bias) trained one sample at a time.

    ``training_mode='float'`` does gradient descent on the squared error.
    ``training_mode='icc'`` keeps each weight as ``w_gain*(G+ - G-)/(G_max - G_min)``
    and writes the push-pull conductance targets through the linear I_CC model;
    a pair is only re-programmed when its output error exceeds ``delta_th``.
    ``lr=None`` picks 0.1 for float and 1.0 for I_CC training.
    """

    def __init__(self, training_mode="float", lr=None, epochs=5, delta_th=0.4, w_gain=4.0,
                 feature_scale=1.0, random_state=None):
        self.training_mode = training_mode
        self.lr = lr
        self.epochs = epochs
        self.delta_th = delta_th
        self.w_gain = w_gain
        self.feature_scale = feature_scale
        self.random_state = random_state

    def _weights(self):
        if self.training_mode == "float":
            return self.w_
        m = self.model_
        return self.w_gain * (self.g_[0] - self.g_[1]) / (m.g_max - m.g_min)

    def _design(self, X):
        X = (np.asarray(X, dtype=float) - self.mean_) / self.std_ * self.feature_scale
        return np.hstack([X, np.ones((len(X), 1))])

    def decision_function(self, X):
        return _sigmoid(self._design(X) @ self._weights().T)

    def _program(self, g_target, rng):
        m = self.model_
        g_target = np.clip(g_target, m.g_min, m.g_max)
        return np.clip(m.sample(m.target_icc(g_target), rng), m.g_min, m.g_max)

    def fit(self, X, y, X_val=None, y_val=None):
        if self.training_mode not in ("float", "icc"):
            raise ConfigurationError("training_mode must be 'float' or 'icc'")
        rng = np.random.default_rng(self.random_state)
        self.classes_ = np.unique(y)
        X = np.asarray(X, dtype=float)
        self.mean_ = X.mean(axis=0)
        self.std_ = np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
        A = self._design(X)
        Y = (np.asarray(y)[:, None] == self.classes_[None, :]).astype(float)
        shape = (len(self.classes_), A.shape[1])
        self.model_ = LinearIccModel()
        mid = 0.5 * (self.model_.g_min + self.model_.g_max)
        if self.training_mode == "float":
            self.w_ = np.zeros(shape)
        else:
            self.g_ = np.stack([self._program(np.full(shape, mid), rng) for _ in range(2)])
        self.writes_ = 0
        self.train_accuracy_, self.val_accuracy_ = [], []
        scale = (self.model_.g_max - self.model_.g_min) / self.w_gain
        lr = self.lr if self.lr is not None else (0.1 if self.training_mode == "float" else 1.0)
        for _ in range(self.epochs):
            for n in rng.permutation(len(A)):
                out = _sigmoid(self._weights() @ A[n])
                err = Y[n] - out
                grad = np.outer(err * out * (1 - out), A[n])
                if self.training_mode == "float":
                    self.w_ += lr * grad
                    continue
                rows = np.abs(err) > self.delta_th
                if not rows.any():
                    continue
                dg = 0.5 * lr * grad[rows] * scale
                self.g_[0][rows] = self._program(self.g_[0][rows] + dg, rng)
                self.g_[1][rows] = self._program(self.g_[1][rows] - dg, rng)
                self.writes_ += 2 * dg.size
            self.train_accuracy_.append(self.score(X, y))
            if X_val is not None:
                self.val_accuracy_.append(self.score(X_val, y_val))
        return self

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


@dataclass(frozen=True)
class RcTaskConfig:
    n_per_class: int = 1000
    n_nodes: int = 30
    sample_dt: float = 35e-3
    test_fraction: float = 0.1
    epochs: int = 5


def run_rc_task(training_mode="icc", seed=0, cfg: RcTaskConfig = RcTaskConfig(), node: VolatileNodeParams = None,
                hyperparams=None):
    """Generate data, compute reservoir features, train the readout. Returns a result dict."""
    trains, labels = make_dataset(cfg.n_per_class, seed)
    feats = VirtualNodeReservoir(cfg.n_nodes, cfg.sample_dt, node, random_state=[seed, 3]).transform(trains)
    rng = np.random.default_rng([seed, 4])
    order = rng.permutation(len(labels))
    n_test = int(round(cfg.test_fraction * len(labels)))
    te, tr = order[:n_test], order[n_test:]
    clf = SigmoidReadout(training_mode, epochs=cfg.epochs, random_state=seed, **(hyperparams or {}))
    clf.fit(feats[tr], labels[tr], feats[te], labels[te])
    pred = clf.predict(feats[te])
    cm = confusion_matrix(labels[te], pred, labels=range(len(CLASSES)))
    per_class = cm.diagonal() / np.maximum(cm.sum(axis=1), 1)
    return {
        "training_mode": training_mode,
        "seed": seed,
        "train_accuracy": clf.train_accuracy_,
        "test_accuracy": clf.val_accuracy_,
        "confusion": cm.tolist(),
        "per_class_accuracy": dict(zip(CLASSES, per_class.tolist())),
        "weakest_class": CLASSES[int(np.argmin(per_class))],
        "device_writes": int(clf.writes_),
    }
