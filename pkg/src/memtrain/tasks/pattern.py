"""Pattern-generation regression task trained online with e-prop on PCM crossbars."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ..crossbar import CrossbarArray, Telemetry
from ..device import ConfigurationError, PcmModelParams, PerfModeParams
from ..eprop import FeedbackMatrix, epoch_gradients, firing_rate_regularizer
from ..snn import LifParams, leaky_filter, poisson_encode, run_lif
from ..updates import PrecisionAccumulator, SchemeConfig, apply_update

FREQUENCIES = (1.0, 2.0, 3.0, 5.0)
DEVICE_MODES = ("pcm", "perf", "float")


@dataclass(frozen=True)
class PatternTaskConfig:
    n_in: int = 100
    n_rec: int = 100
    n_out: int = 1
    duration: float = 1.0
    dt: float = 1e-3
    in_rate: float = 50.0
    epochs: int = 250
    success_mse: float = 0.1


def make_target(rng, duration=1.0, dt=1e-3, frequencies=FREQUENCIES, amp_range=(0.5, 2.0)):
    t = np.arange(int(round(duration / dt))) * dt
    amps = rng.uniform(*amp_range, size=len(frequencies))
    phases = rng.uniform(0.0, 2 * math.pi, size=len(frequencies))
    return sum(a * np.sin(2 * math.pi * f * t + p) for a, f, p in zip(amps, frequencies, phases))


def make_pattern_data(seed, cfg: PatternTaskConfig = PatternTaskConfig()):
    """Frozen Poisson input raster ``(T, n_in)`` and target ``(T, n_out)`` for a seed."""
    rng = np.random.default_rng([seed, 0])
    x = poisson_encode(np.full(cfg.n_in, cfg.in_rate), cfg.duration, cfg.dt, rng).astype(float)
    y = np.stack([make_target(rng, cfg.duration, cfg.dt) for _ in range(cfg.n_out)], axis=1)
    return x, y


class _FloatLayer:
    """Stand-in for a crossbar holding exact weights (``device_mode='float'``)."""

    def __init__(self, w):
        self.w = np.array(w, dtype=float)
        self.telemetry = Telemetry()

    def read_weights(self, t_now):
        return self.w


class EpropRegressor(BaseEstimator, RegressorMixin):
    """LIF recurrent network with leaky readout, trained by e-prop.

    Weights live on differential crossbars in ``[-1, 1]`` units and are scaled
    by per-layer gains in the forward pass. One call to :meth:`fit` runs
    ``epochs`` presentations of a single input/target sequence; device time
    advances by the sequence duration per epoch and weights are read once per
    epoch.

    Parameters
    ----------
    scheme : {'sign_gd', 'stochastic', 'multi_memristor', 'mixed_precision'}
    device_mode : {'pcm', 'perf', 'float'}
        Statistical PCM model, ideal quantized devices, or exact float weights
        (plain gradient descent with ``lr``).
    n_devices : int
        Devices per polarity.
    lr, theta, p : float
        Scheme parameters; ``lr`` scales gradients for the multi-memristor and
        mixed-precision schemes.
    gain_in, gain_rec, gain_out : float
        Weight gains applied to the crossbar weights.
    layer_scale : tuple of 3 floats
        Per-layer gradient multipliers (input, recurrent, output) applied
        before the update scheme.
    grad_clip : float or None
        Elementwise bound on the scaled gradient before the update scheme.
    init_in, init_rec, init_out : float
        Standard deviation of the initial crossbar weights.
    rate_reg : float
        Firing-rate regularization strength toward ``f_target`` Hz.

    Defaults come from a seeded random search on the mixed-precision PCM
    setting and are shared by all schemes.
    """

    def __init__(self, scheme="mixed_precision", device_mode="pcm", n_devices=1, n_rec=100, epochs=250,
                 lr=0.036, theta=0.7, p=10.0, gain_in=0.5, gain_rec=0.38, gain_out=0.45,
                 init_in=0.48, init_rec=0.007, init_out=0.0, rate_reg=0.002, f_target=10.0,
                 filter_learning_signal=True, feedback="random", tau_m=30e-3, tau_out=60e-3, cb_res=4,
                 layer_scale=(18.6, 3.3, 1.0), grad_clip=1.0, random_state=None):
        self.scheme = scheme
        self.device_mode = device_mode
        self.n_devices = n_devices
        self.n_rec = n_rec
        self.epochs = epochs
        self.lr = lr
        self.theta = theta
        self.p = p
        self.gain_in = gain_in
        self.gain_rec = gain_rec
        self.gain_out = gain_out
        self.init_in = init_in
        self.init_rec = init_rec
        self.init_out = init_out
        self.rate_reg = rate_reg
        self.f_target = f_target
        self.filter_learning_signal = filter_learning_signal
        self.feedback = feedback
        self.tau_m = tau_m
        self.tau_out = tau_out
        self.cb_res = cb_res
        self.layer_scale = layer_scale
        self.grad_clip = grad_clip
        self.random_state = random_state

    # -- construction ----------------------------------------------------------

    def _layer(self, shape, init_std, rng, t0):
        w0 = np.clip(rng.normal(0.0, init_std, size=shape), -1.0, 1.0)
        if shape[0] == shape[1] and shape == (self.n_rec, self.n_rec):
            np.fill_diagonal(w0, 0.0)
        if self.device_mode == "float":
            return _FloatLayer(w0)
        params = PerfModeParams(cb_res=self.cb_res) if self.device_mode == "perf" else PcmModelParams()
        xbar = CrossbarArray(shape[0], shape[1], n=self.n_devices, params=params, rng=rng, t_now=t0)
        xbar.program_weights(w0, t0)
        return xbar

    def _scheme(self):
        return SchemeConfig(variant=self.scheme, theta=self.theta, p=self.p, n=self.n_devices, lr=self.lr)

    def _validate(self):
        if self.device_mode not in DEVICE_MODES:
            raise ConfigurationError(f"device_mode must be one of {DEVICE_MODES}")
        self._scheme()

    def _forward(self, X, w_in, w_rec, w_out, params):
        v, z = run_lif(X, self.gain_in * w_in, self.gain_rec * w_rec, params)
        y = leaky_filter(z @ (self.gain_out * w_out).T, params.kappa)
        return v, z, y

    def fit(self, X, y):
        """Train on one sequence. ``X`` is ``(T, n_in)`` input spikes, ``y`` is ``(T,)`` or ``(T, n_out)``."""
        self._validate()
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if X.shape[0] != y.shape[0]:
            raise ConfigurationError("X and y must have the same number of time steps")
        T, n_in = X.shape
        n_out = y.shape[1]
        params = LifParams(tau_m=self.tau_m, tau_out=self.tau_out)
        duration = T * params.dt
        rng = np.random.default_rng(self.random_state)
        self.layers_ = [
            self._layer((self.n_rec, n_in), self.init_in, rng, 0.0),
            self._layer((self.n_rec, self.n_rec), self.init_rec, rng, 0.0),
            self._layer((n_out, self.n_rec), self.init_out, rng, 0.0),
        ]
        self.init_telemetry_ = sum((l.telemetry for l in self.layers_), Telemetry())
        for l in self.layers_:
            l.telemetry = Telemetry()
        self.feedback_ = FeedbackMatrix(self.n_rec, n_out, self.feedback, rng)
        accs = [PrecisionAccumulator(l.w.shape if isinstance(l, _FloatLayer) else (l.p, l.q)) for l in self.layers_]
        cfg = self._scheme()
        gains = [g * s for g, s in zip((self.gain_in, self.gain_rec, self.gain_out), self.layer_scale)]

        self.loss_curve_ = []
        self.telemetry_ = []
        self.firing_rate_ = []
        self.failed_ = False
        for epoch in range(self.epochs):
            t_now = (epoch + 1) * duration
            ws = [l.read_weights(t_now) for l in self.layers_]
            np.fill_diagonal(ws[1], 0.0)
            v, z, out = self._forward(X, *ws, params)
            mse = float(np.mean((out - y) ** 2))
            rates = z.sum(axis=0) / duration
            self.loss_curve_.append(mse)
            self.firing_rate_.append(float(rates.mean()))
            if not math.isfinite(mse):
                self.failed_ = True
                break
            reg = firing_rate_regularizer(z.sum(axis=0), duration, self.f_target, self.rate_reg) if self.rate_reg else None
            b_out = self.feedback_.matrix(self.gain_out * ws[2])
            grads = epoch_gradients(X, v, z, out, y, b_out, params, rate_reg=reg,
                                    filter_learning_signal=self.filter_learning_signal)
            record = Telemetry()
            for layer, acc, grad, gain in zip(self.layers_, accs, grads, gains):
                grad = gain * grad / T
                if self.grad_clip is not None:
                    grad = np.clip(grad, -self.grad_clip, self.grad_clip)
                if isinstance(layer, _FloatLayer):
                    layer.w -= self.lr * grad
                    np.clip(layer.w, -1.0, 1.0, out=layer.w)
                else:
                    record = record + apply_update(layer, grad, cfg, t_now, rng=rng, accumulator=acc)
            self.telemetry_.append(record.as_dict())
        self.final_mse_ = self.loss_curve_[-1] if self.loss_curve_ else math.nan
        self.t_end_ = (len(self.loss_curve_) + 1) * duration
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        params = LifParams(tau_m=self.tau_m, tau_out=self.tau_out)
        ws = [l.read_weights(self.t_end_) for l in self.layers_]
        np.fill_diagonal(ws[1], 0.0)
        return self._forward(X, *ws, params)[2]

    @property
    def total_sets_(self):
        return int(sum(r["sets"] for r in self.telemetry_))

    @property
    def total_resets_(self):
        return int(sum(r["resets"] for r in self.telemetry_))


@dataclass
class PatternResult:
    scheme: str
    device_mode: str
    seed: int
    final_mse: float
    loss_curve: list
    sets: int
    resets: int
    refreshes: int
    firing_rate: float
    failed: bool
    hyperparams: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def run_pattern_task(scheme="mixed_precision", device_mode="pcm", seed=0, hyperparams=None,
                     cfg: PatternTaskConfig = PatternTaskConfig()) -> PatternResult:
    hp = dict(hyperparams or {})
    hp.setdefault("epochs", cfg.epochs)
    hp.setdefault("n_rec", cfg.n_rec)
    x, y = make_pattern_data(seed, cfg)
    est = EpropRegressor(scheme=scheme, device_mode=device_mode, random_state=seed, **hp).fit(x, y)
    tel = est.telemetry_
    return PatternResult(
        scheme=scheme, device_mode=device_mode, seed=seed, final_mse=est.final_mse_,
        loss_curve=est.loss_curve_, sets=est.total_sets_, resets=est.total_resets_,
        refreshes=int(sum(r["refreshes"] for r in tel)), firing_rate=est.firing_rate_[-1] if est.firing_rate_ else 0.0,
        failed=est.failed_, hyperparams=hp,
    )
