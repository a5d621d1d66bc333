"""Eligibility traces stored in the drift of PCM cells.

A tag is a gradual SET that multiplies the present (drifted) conductance by
``tag_gain`` and restarts drift. Between tags the cell relaxes as
``g_p * ((t - t_p) / t_unit) ** -nu``.
"""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .crossbar import GRANULARITY
from .device import ConfigurationError

G_HRS = 0.4  # µS, about 1 / 2.5 MΩ
G_LRS = 5.0  # µS, about 1 / 200 kΩ


@dataclass(frozen=True)
class TraceCell:
    g_p: float = G_HRS
    t_p: float = 0.0
    nu: float = 0.1
    t_unit: float = 1.0
    t_init: float = 0.25
    tag_gain: float = 1.5
    g_hrs: float = G_HRS
    g_ceiling: float = G_LRS
    initialized_at: float = 0.0
    saturated: bool = False

    def __post_init__(self):
        if self.g_p <= 0:
            raise ConfigurationError("g_p must be > 0")
        if self.nu < 0 or self.t_unit <= 0 or self.t_init < 0:
            raise ConfigurationError("invalid drift parameters")


class TagRejected(RuntimeError):
    """Tag arrived before the initialization wait elapsed."""


def trace_init(cell: TraceCell, t_now) -> TraceCell:
    return dataclasses.replace(cell, g_p=cell.g_hrs, t_p=t_now, initialized_at=t_now, saturated=False)


def trace_read(cell: TraceCell, t_now):
    if t_now < cell.t_p:
        raise ConfigurationError(f"t_now={t_now} precedes t_p={cell.t_p}")
    elapsed = t_now - cell.t_p
    if elapsed < cell.t_unit:
        return cell.g_p
    return cell.g_p * (elapsed / cell.t_unit) ** (-cell.nu)


def trace_ready(cell: TraceCell, t_now):
    return t_now >= cell.initialized_at + cell.t_init


def trace_tag(cell: TraceCell, t_now) -> TraceCell:
    """Gradual SET; raises :class:`TagRejected` during the initialization wait.

    Crossing ``g_ceiling`` sets the ``saturated`` flag (the cell is stuck in LRS).
    """
    if not trace_ready(cell, t_now):
        raise TagRejected(f"tag at t={t_now} before init wait ends at {cell.initialized_at + cell.t_init}")
    g = cell.tag_gain * trace_read(cell, t_now)
    saturated = cell.saturated or g > cell.g_ceiling
    return dataclasses.replace(cell, g_p=min(g, cell.g_ceiling), t_p=t_now, saturated=saturated)


def drift_recursion(g0, t_p, times, nu):
    """Step the difference form ``G(t+dt) = ((t-t_p)/(t-t_p+dt))**nu * G(t)`` over ``times``.

    ``times`` must start at or after ``t_p + 1`` (the point where drift starts in
    units of ``t_unit = 1``). Returns the conductance at each time.
    """
    times = np.asarray(times, dtype=float)
    out = np.empty_like(times)
    g = float(g0) * (times[0] - t_p) ** (-nu)
    out[0] = g
    for idx in range(1, len(times)):
        g *= ((times[idx - 1] - t_p) / (times[idx] - t_p)) ** nu
        out[idx] = g
    return out


@dataclass
class MultiTrace:
    """M trace cells tagged round-robin and read in parallel."""

    cells: List[TraceCell]
    cursor: int = 0

    @classmethod
    def create(cls, m, t_now=0.0, **cell_kwargs):
        if m < 1:
            raise ConfigurationError("m must be >= 1")
        return cls([trace_init(TraceCell(**cell_kwargs), t_now) for _ in range(m)])

    @property
    def saturated(self):
        return any(c.saturated for c in self.cells)

    def tag(self, t_now):
        self.cells[self.cursor] = trace_tag(self.cells[self.cursor], t_now)
        self.cursor = (self.cursor + 1) % len(self.cells)
        return self

    def read(self, t_now):
        return sum(trace_read(c, t_now) for c in self.cells)

    def reinit(self, t_now):
        self.cells = [trace_init(c, t_now) for c in self.cells]
        self.cursor = 0
        return self


def multitrace_tag(mt: MultiTrace, t_now):
    return mt.tag(t_now)


def multitrace_read(mt: MultiTrace, t_now):
    return mt.read(t_now)


@dataclass
class ThreeFactorSynapse:
    """A differential weight (W+, W-) with its two eligibility traces."""

    e_pos: MultiTrace
    e_neg: MultiTrace
    w_pos: float = 0.1
    w_neg: float = 0.1
    set_pulses: int = 0

    @classmethod
    def create(cls, m=1, t_now=0.0, **cell_kwargs):
        return cls(MultiTrace.create(m, t_now, **cell_kwargs), MultiTrace.create(m, t_now, **cell_kwargs))

    @property
    def weight(self):
        return self.w_pos - self.w_neg


@dataclass(frozen=True)
class ThreeFactorConfig:
    i_th_pos: float = 1.0
    i_th_neg: float = -1.0
    scale_const: float = 1.0
    granularity: float = GRANULARITY
    g_max: float = 12.0
    subtract_baseline: bool = False


def three_factor_step(syn: ThreeFactorSynapse, t_now, pre_spike: bool, i_mem: float, reward: Optional[float],
                      cfg: ThreeFactorConfig = ThreeFactorConfig()):
    """One event of the three-factor rule.

    A presynaptic spike tags ``e_pos`` when ``i_mem > i_th_pos`` and ``e_neg``
    when ``i_mem < i_th_neg``. A reward reads both traces and applies
    ``round(scale_const * reward * read / granularity)`` SET pulses to the
    matching weight device, then re-initializes the traces. Returns the
    ``(pulses_pos, pulses_neg)`` applied.
    """
    if pre_spike:
        for trace, fire in ((syn.e_pos, i_mem > cfg.i_th_pos), (syn.e_neg, i_mem < cfg.i_th_neg)):
            if fire and trace_ready(trace.cells[trace.cursor], t_now):
                trace.tag(t_now)
    if reward is None or reward == 0:
        return 0, 0
    pulses = []
    for trace in (syn.e_pos, syn.e_neg):
        e = trace.read(t_now)
        if cfg.subtract_baseline:
            e = max(0.0, e - sum(trace_read(dataclasses.replace(c, g_p=c.g_hrs, t_p=c.initialized_at), t_now)
                                 for c in trace.cells))
        pulses.append(int(np.rint(abs(reward) * cfg.scale_const * e / cfg.granularity)))
    k_pos, k_neg = pulses if reward > 0 else pulses[::-1]
    syn.w_pos = min(syn.w_pos + k_pos * cfg.granularity, cfg.g_max)
    syn.w_neg = min(syn.w_neg + k_neg * cfg.granularity, cfg.g_max)
    syn.set_pulses += k_pos + k_neg
    syn.e_pos.reinit(t_now)
    syn.e_neg.reinit(t_now)
    return k_pos, k_neg


def trace_timeline(mt: MultiTrace, tag_times, t_end, dt=0.01):
    """Simulate tags on a fresh copy of ``mt`` and sample every cell.

    Returns rows ``(t, cell, g)``; tags rejected by the init wait are skipped.
    """
    mt = MultiTrace(list(mt.cells), mt.cursor)
    tags = sorted(tag_times)
    rows = []
    t0 = min(c.t_p for c in mt.cells)
    for t in np.arange(t0, t_end + dt / 2, dt):
        while tags and tags[0] <= t + 1e-12:
            tt = tags.pop(0)
            if trace_ready(mt.cells[mt.cursor], tt):
                mt.tag(tt)
        for idx, c in enumerate(mt.cells):
            rows.append((round(float(t), 10), idx, trace_read(c, t)))
    return rows


def write_timeline_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cell", "g"])
        for t, c, g in rows:
            w.writerow([t, c, repr(float(g))])
