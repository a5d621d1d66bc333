"""Five-class MNIST with a single-layer SNN trained by the dual-memristor Delta rule.

Each synapse is a pair of RRAM devices whose difference sets the weight. An
update re-programs both devices at compliance currents computed from their
present conductances and the error of the postsynaptic neuron; new
conductances are drawn from the power-law I_CC model.
"""
from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..device import ConfigurationError
from ..icc import PowerLawIccModel
from ..snn import leaky_filter

ENV_DIR = "MEMTRAIN_MNIST_DIR"
DEFAULT_DIR = "~/data/mnist"
FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
_DTYPES = {0x08: np.uint8, 0x09: np.int8, 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4", 0x0E: ">f8"}


class DatasetMissing(FileNotFoundError):
    pass


def read_idx(path):
    """Read an IDX file (optionally gzipped) into an array of its declared shape."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[0] != 0 or data[1] != 0:
        raise ConfigurationError(f"{path}: not an IDX file")
    code, ndim = data[2], data[3]
    if code not in _DTYPES:
        raise ConfigurationError(f"{path}: unknown IDX type code 0x{code:02x}")
    dims = struct.unpack(f">{ndim}I", data[4:4 + 4 * ndim])
    arr = np.frombuffer(data, dtype=_DTYPES[code], offset=4 + 4 * ndim)
    if arr.size != int(np.prod(dims)):
        raise ConfigurationError(f"{path}: expected {int(np.prod(dims))} items, found {arr.size}")
    return arr.reshape(dims)


def write_idx(path, arr):
    arr = np.asarray(arr)
    code = {np.dtype(np.uint8): 0x08, np.dtype(np.int8): 0x09}.get(arr.dtype)
    if code is None:
        raise ConfigurationError("only uint8/int8 arrays are supported")
    with open(path, "wb") as fh:
        fh.write(bytes([0, 0, code, arr.ndim]))
        fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def mnist_dir(root=None):
    return Path(os.path.expanduser(root or os.environ.get(ENV_DIR) or DEFAULT_DIR))


def _find(root, name):
    for cand in (root / name, root / (name + ".gz")):
        if cand.exists():
            return cand
    raise DatasetMissing(
        f"MNIST file {name} not found in {root}. Download the four IDX files "
        f"(train/t10k images and labels, gzipped or not) from the MNIST distribution "
        f"into that directory, or point ${ENV_DIR} at a directory that holds them."
    )


def load_mnist(split="train", root=None, classes=(0, 1, 2, 3, 4)):
    """Images ``(n, 784)`` as uint8 and labels for the requested digit classes."""
    root = mnist_dir(root)
    img_name, lbl_name = FILES[split]
    images = read_idx(_find(root, img_name))
    labels = read_idx(_find(root, lbl_name))
    keep = np.isin(labels, classes)
    return images[keep].reshape(int(keep.sum()), -1), labels[keep].astype(np.int64)


@dataclass(frozen=True)
class MnistTaskConfig:
    classes: tuple = (0, 1, 2, 3, 4)
    n_train: int | None = None
    n_test: int | None = None
    epochs: int = 3
    presentation: float = 0.1
    dt: float = 1e-3
    max_rate: float = 200.0
    target_rate: float = 40e3


class DeltaRuleSNNClassifier(BaseEstimator, ClassifierMixin):
    """784-input LIF layer with RRAM device-pair weights and Delta-rule updates.

    Pixels drive Poisson inputs with rates up to ``max_rate``. Output and
    target spike trains are low-passed with ``tau_lpf``; the error of neuron
    ``j`` is the time-averaged difference of the filtered traces, each
    normalized to its reference rate (``target_rate`` for the teacher,
    ``rate_ref`` for the network). Prediction is the neuron with the most
    spikes.

    Parameters
    ----------
    eta : float
        Conductance change (µS) per unit error and unit presynaptic activity.
    delta_th : float
        Stop-learning threshold on ``|error|``.
    w_scale : float
        Synaptic current per µS of conductance difference.
    icc_mapping : {'inverse', 'linear'}
        How the updated target conductance becomes a compliance current:
        the exact inverse of the power law, or the constant ``c2`` scaling.
    """

    def __init__(self, eta=63.0, delta_th=0.21, w_scale=1.74e-4, tau_m=10e-3, v_th=1.0, tau_lpf=10e-3,
                 presentation=0.1, dt=1e-3, max_rate=200.0, target_rate=40e3, rate_ref=200.0,
                 sigma_frac=0.3, icc_mapping="inverse", c1=1.0, c2=1.0, epochs=3, g_init=(20.0, 60.0),
                 random_state=None):
        self.eta = eta
        self.delta_th = delta_th
        self.w_scale = w_scale
        self.tau_m = tau_m
        self.v_th = v_th
        self.tau_lpf = tau_lpf
        self.presentation = presentation
        self.dt = dt
        self.max_rate = max_rate
        self.target_rate = target_rate
        self.rate_ref = rate_ref
        self.sigma_frac = sigma_frac
        self.icc_mapping = icc_mapping
        self.c1 = c1
        self.c2 = c2
        self.epochs = epochs
        self.g_init = g_init
        self.random_state = random_state

    @property
    def n_steps(self):
        return int(round(self.presentation / self.dt))

    def _encode(self, images, rng):
        rates = np.asarray(images, dtype=float) / 255.0 * self.max_rate
        return (rng.random((self.n_steps,) + rates.shape) < rates * self.dt).astype(float)

    def _simulate(self, spikes):
        """LIF layer over ``(T, batch, n_in)`` input spikes -> output spikes ``(T, batch, n_out)``."""
        alpha = np.exp(-self.dt / self.tau_m)
        w = self.w_scale * (self.g_[0] - self.g_[1])
        current = spikes @ w.T
        v = np.zeros(current.shape[1:])
        out = np.zeros_like(current)
        for t in range(current.shape[0]):
            v = alpha * v + current[t]
            fired = v >= self.v_th
            out[t] = fired
            v = np.where(fired, 0.0, v)
        return out

    def _icc(self, g_target):
        if self.icc_mapping == "inverse":
            return self.model_.inverse(g_target)
        return np.clip(g_target * self.c2, self.model_.i_min, self.model_.i_max)

    def _update(self, x_spikes, out_spikes, label, rng):
        decay = np.exp(-self.dt / self.tau_lpf)
        target = np.zeros((self.n_steps, len(self.classes_)))
        target[:, label] = self.target_rate * self.dt
        err = (leaky_filter(target, decay) / (self.target_rate * self.dt)
               - leaky_filter(out_spikes, decay) / (self.rate_ref * self.dt))
        delta = err.mean(axis=0) * (1 - decay)
        active = x_spikes.mean(axis=0) * (1.0 / (self.max_rate * self.dt))
        rows = np.abs(delta) > self.delta_th
        if not rows.any():
            return 0
        cols = active > 0
        step = self.eta * np.outer(delta[rows], active[cols])
        g1 = self.g_[0][np.ix_(rows, cols)]
        g2 = self.g_[1][np.ix_(rows, cols)]
        new1 = self.model_.sample(self._icc(self.c1 * g1 + step), rng)
        new2 = self.model_.sample(self._icc(self.c1 * g2 - step), rng)
        self.g_[0][np.ix_(rows, cols)] = new1
        self.g_[1][np.ix_(rows, cols)] = new2
        return 2 * new1.size

    def fit(self, X, y, X_val=None, y_val=None):
        if self.icc_mapping not in ("inverse", "linear"):
            raise ConfigurationError("icc_mapping must be 'inverse' or 'linear'")
        X = np.asarray(X)
        y = np.asarray(y)
        rng = np.random.default_rng(self.random_state)
        self.classes_ = np.unique(y)
        idx = np.searchsorted(self.classes_, y)
        self.model_ = PowerLawIccModel(sigma_frac=self.sigma_frac)
        shape = (len(self.classes_), X.shape[1])
        lo, hi = self.g_init
        self.g_ = np.stack([self.model_.sample(self.model_.inverse(rng.uniform(lo, hi, shape)), rng)
                            for _ in range(2)])
        self.writes_ = 0
        self.train_accuracy_ = []
        self.val_accuracy_ = []
        for _ in range(self.epochs):
            correct = 0
            for n in rng.permutation(len(X)):
                x = self._encode(X[n], rng)
                out = self._simulate(x[:, None, :])[:, 0, :]
                correct += int(np.argmax(out.sum(axis=0)) == idx[n])
                self.writes_ += self._update(x, out, idx[n], rng)
            self.train_accuracy_.append(correct / len(X))
            if X_val is not None:
                self.val_accuracy_.append(self.score(X_val, y_val))
        return self

    def spike_counts(self, X, batch=500, seed=None):
        X = np.asarray(X)
        rng = np.random.default_rng(seed if seed is not None else self.random_state)
        counts = []
        for s in range(0, len(X), batch):
            counts.append(self._simulate(self._encode(X[s:s + batch], rng)).sum(axis=0))
        return np.concatenate(counts)

    def predict(self, X):
        return self.classes_[np.argmax(self.spike_counts(X), axis=1)]


def _subset(x, y, n, rng):
    if n is None or n >= len(y):
        return x, y
    sel = rng.choice(len(y), size=n, replace=False)
    return x[sel], y[sel]


def run_mnist_task(n_train=5000, n_test=1000, seed=0, root=None, hyperparams=None, shuffle_labels=False,
                   cfg: MnistTaskConfig = MnistTaskConfig()):
    """Train on a class-filtered subset; returns per-epoch train/test accuracy and write counts."""
    rng = np.random.default_rng([seed, 1])
    xtr, ytr = _subset(*load_mnist("train", root, cfg.classes), n_train, rng)
    xte, yte = _subset(*load_mnist("test", root, cfg.classes), n_test, rng)
    if shuffle_labels:
        ytr = rng.permutation(ytr)
    hp = dict(epochs=cfg.epochs, presentation=cfg.presentation, dt=cfg.dt, max_rate=cfg.max_rate,
              target_rate=cfg.target_rate)
    hp.update(hyperparams or {})
    clf = DeltaRuleSNNClassifier(random_state=seed, **hp).fit(xtr, ytr, xte, yte)
    return {
        "seed": seed,
        "n_train": len(ytr),
        "n_test": len(yte),
        "train_accuracy": clf.train_accuracy_,
        "test_accuracy": clf.val_accuracy_,
        "device_writes": int(clf.writes_),
        "hyperparams": hp,
    }
