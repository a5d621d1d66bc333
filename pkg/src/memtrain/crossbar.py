"""Differential PCM crossbar: P x Q synapses, each with N devices per polarity.

Device state lives in arrays of shape ``(2, N, P, Q)``; index 0 of the first
axis is the potentiating (G+) polarity and index 1 the depressing (G-) one.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .device import (
    ConfigurationError,
    DeviceParams,
    PcmModelParams,
    read_array,
    reset_array,
    set_pulse_array,
)

GRANULARITY = 0.75  # µS, nominal conductance step of one SET pulse
REFRESH_LEVEL = 9.0  # µS
REFRESH_DIFF = 4.5  # µS

POS, NEG = 0, 1


@dataclass
class Telemetry:
    sets: int = 0
    resets: int = 0
    refreshes: int = 0

    def __add__(self, other):
        return Telemetry(self.sets + other.sets, self.resets + other.resets, self.refreshes + other.refreshes)

    def as_dict(self):
        return {"sets": self.sets, "resets": self.resets, "refreshes": self.refreshes}


class CrossbarArray:
    """P x Q differential synapses backed by 2*N PCM devices each.

    Parameters
    ----------
    p, q : int
        Rows and columns.
    n : int
        Devices per polarity.
    params : PcmModelParams or PerfModeParams
    beta : float, optional
        Weight scale in 1/µS. Defaults to ``1 / (n * (g_max - g_min))`` so the
        full differential range maps onto ``[-1, 1]``.
    rng : numpy Generator or int seed
    """

    def __init__(self, p, q, n=1, params: DeviceParams = None, beta=None, rng=None, t_now=0.0):
        if p < 1 or q < 1 or n < 1:
            raise ConfigurationError("p, q and n must be positive")
        self.p, self.q, self.n = int(p), int(q), int(n)
        self.params = params if params is not None else PcmModelParams()
        self.beta = beta if beta is not None else 1.0 / (self.n * (self.params.g_max - self.params.g_min))
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        shape = self.shape
        self.g = reset_array(shape, self.params, self.rng)
        self.t_p = np.full(shape, float(t_now))
        self.count = np.zeros(shape, dtype=np.int64)
        self.p_mem = np.ones(shape)
        # lifetime counters, never cleared by RESET
        self.total_sets = np.zeros(shape, dtype=np.int64)
        self.total_resets = np.zeros(shape, dtype=np.int64)
        # next device index per (polarity, synapse) for round-robin pulsing
        self.cursor = np.zeros((2, self.p, self.q), dtype=np.int64)
        self.telemetry = Telemetry()

    @property
    def shape(self):
        return (2, self.n, self.p, self.q)

    @property
    def n_devices(self):
        return int(np.prod(self.shape))

    def _check_mask(self, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.shape:
            raise ConfigurationError(f"mask shape {mask.shape} does not match array {self.shape}")
        return mask

    # -- primitive operations ----------------------------------------------

    def read_conductances(self, t_now):
        return read_array(self.g, self.t_p, t_now, self.params, self.rng)

    def read_weights(self, t_now):
        """Effective weights ``beta * (sum G+ - sum G-)`` read at ``t_now``."""
        g = self.read_conductances(t_now)
        return self.beta * (g[POS].sum(axis=0) - g[NEG].sum(axis=0))

    def stored_weights(self):
        """Weights from the stored (undrifted, noise-free) conductances."""
        return self.beta * (self.g[POS].sum(axis=0) - self.g[NEG].sum(axis=0))

    def set_masked(self, mask, t_now):
        mask = self._check_mask(mask)
        k = int(mask.sum())
        if k == 0:
            return 0
        g, p_mem = set_pulse_array(self.g[mask], self.p_mem[mask], self.params, self.rng)
        self.g[mask] = g
        self.p_mem[mask] = p_mem
        self.t_p[mask] = t_now
        self.count[mask] += 1
        self.total_sets[mask] += 1
        self.telemetry.sets += k
        return k

    def reset_masked(self, mask, t_now):
        mask = self._check_mask(mask)
        k = int(mask.sum())
        if k == 0:
            return 0
        self.g[mask] = reset_array(k, self.params, self.rng)
        self.p_mem[mask] = 1.0
        self.t_p[mask] = t_now
        self.count[mask] = 0
        self.total_resets[mask] += 1
        self.telemetry.resets += k
        return k

    # -- pulse dealing -------------------------------------------------------

    def apply_pulses(self, pulses, t_now):
        """Deal integer pulse counts of shape ``(2, P, Q)`` round-robin over each polarity's N devices.

        Returns the number of SET pulses applied.
        """
        remaining = np.asarray(pulses, dtype=np.int64).copy()
        if remaining.shape != (2, self.p, self.q):
            raise ConfigurationError(f"pulse array shape {remaining.shape} != {(2, self.p, self.q)}")
        if np.any(remaining < 0):
            raise ConfigurationError("pulse counts must be non-negative")
        applied = 0
        dev_idx = np.arange(self.n)[None, :, None, None]
        while True:
            active = remaining > 0
            if not active.any():
                break
            mask = active[:, None] & (self.cursor[:, None] == dev_idx)
            applied += self.set_masked(mask, t_now)
            self.cursor[active] = (self.cursor[active] + 1) % self.n
            remaining[active] -= 1
        return applied

    # -- refresh -------------------------------------------------------------

    def refresh_candidates(self, where=None):
        """Boolean P x Q map of synapses meeting the saturation criterion."""
        sums = self.g.sum(axis=1) / self.n
        high = np.maximum(sums[POS], sums[NEG]) > REFRESH_LEVEL
        close = np.abs(sums[POS] - sums[NEG]) < REFRESH_DIFF
        cand = high & close
        if where is not None:
            cand &= np.asarray(where, dtype=bool)
        return cand

    def refresh_where(self, t_now, where=None, granularity=GRANULARITY):
        """Refresh every synapse meeting the criterion (optionally restricted to ``where``).

        Returns the number of synapses refreshed.
        """
        cand = self.refresh_candidates(where)
        n_ref = int(cand.sum())
        if n_ref == 0:
            return 0
        diff = self.g[POS].sum(axis=0) - self.g[NEG].sum(axis=0)
        n_pulses = np.rint(np.abs(diff) / granularity).astype(np.int64)
        self.reset_masked(np.broadcast_to(cand, self.shape), t_now)
        self.cursor[:, cand] = 0
        pulses = np.zeros((2, self.p, self.q), dtype=np.int64)
        pulses[POS] = np.where(cand & (diff > 0), n_pulses, 0)
        pulses[NEG] = np.where(cand & (diff < 0), n_pulses, 0)
        self.apply_pulses(pulses, t_now)
        self.telemetry.refreshes += n_ref
        return n_ref

    def refresh(self, i, j, t_now, granularity=GRANULARITY):
        """Refresh synapse ``(i, j)`` if saturated; returns whether it fired."""
        where = np.zeros((self.p, self.q), dtype=bool)
        where[i, j] = True
        return self.refresh_where(t_now, where, granularity) == 1

    # -- programming helpers -------------------------------------------------

    def program_weights(self, w, t_now, granularity=GRANULARITY):
        """Open-loop program target weights from the current state by SET pulses on the sign polarity.

        Intended for initialisation right after construction (devices near HRS).
        """
        w = np.asarray(w, dtype=float)
        n_p = np.rint(np.abs(w) / self.beta / granularity).astype(np.int64)
        pulses = np.stack([np.where(w > 0, n_p, 0), np.where(w < 0, n_p, 0)])
        return self.apply_pulses(pulses, t_now)

    # -- snapshot I/O ---------------------------------------------------------

    SNAPSHOT_FIELDS = ("polarity", "n", "i", "j", "g", "t_p", "count", "p_mem")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.SNAPSHOT_FIELDS)
            for idx in np.ndindex(*self.shape):
                writer.writerow([*idx, repr(float(self.g[idx])), repr(float(self.t_p[idx])),
                                 int(self.count[idx]), repr(float(self.p_mem[idx]))])

    def load_csv(self, path):
        seen = np.zeros(self.shape, dtype=bool)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                idx = tuple(int(row[k]) for k in ("polarity", "n", "i", "j"))
                self.g[idx] = float(row["g"])
                self.t_p[idx] = float(row["t_p"])
                self.count[idx] = int(row["count"])
                self.p_mem[idx] = float(row["p_mem"])
                seen[idx] = True
        if not seen.all():
            raise ConfigurationError("snapshot does not cover every device")
        return self

    @classmethod
    def from_csv(cls, path, params: DeviceParams = None, beta=None, rng=None):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        n = 1 + max(int(r["n"]) for r in rows)
        p = 1 + max(int(r["i"]) for r in rows)
        q = 1 + max(int(r["j"]) for r in rows)
        xbar = cls(p, q, n, params=params, beta=beta, rng=rng)
        return xbar.load_csv(path)


def weight_transfer_error(array_factory: Callable[[int], CrossbarArray], n: int, g_source: int, g_target: int,
                          t_now: float = 0.0, granularity: float = GRANULARITY):
    """Monte-Carlo programming error of the multi-memristor scheme.

    Each synapse of a fresh array from ``array_factory(n)`` is programmed to the
    normalized source conductance, then moved to the target with round-robin
    SET pulses. The error is the achieved minus intended change of the
    normalized conductance (summed conductance divided by N), in µS.

    Returns ``(mean_error, std_error)``.
    """
    if not (-10 <= g_source <= 10 and -10 <= g_target <= 10):
        raise ConfigurationError("source and target must lie in [-10, 10] µS")
    xbar = array_factory(n)

    def program(delta):
        k = int(np.rint(abs(delta) * n / granularity))
        pulses = np.zeros((2, xbar.p, xbar.q), dtype=np.int64)
        if k:
            pulses[POS if delta > 0 else NEG] = k
        xbar.apply_pulses(pulses, t_now)

    program(g_source)
    before = xbar.g[POS].sum(axis=0) - xbar.g[NEG].sum(axis=0)
    program(g_target - g_source)
    after = xbar.g[POS].sum(axis=0) - xbar.g[NEG].sum(axis=0)
    err = (after - before) / n - (g_target - g_source)
    return float(err.mean()), float(err.std(ddof=1)) if err.size > 1 else 0.0
