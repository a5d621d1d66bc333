"""Mosaic tile-grid analytics.

The fabric is a ``(2i+1) x (2i+1)`` grid. Neuron Tiles sit at coordinates
where both row and column are even, giving ``(i+1)**2`` of them; every other
position is a Routing Tile. Each Neuron Tile holds ``k`` neurons, assigned in
tile-major order.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np

from .device import ConfigurationError

NEURON_TILE_DEVICES = 5  # per k^2: k x 5k crossbar (4 directions + recurrent)
ROUTING_TILE_DEVICES = 16  # per k^2: 4k x 4k crossbar


def grid_parameter(n_neurons, k):
    if k <= 0 or n_neurons <= 0:
        raise ConfigurationError("n_neurons and k must be positive")
    # ceil(sqrt(m)) - 1 == isqrt(m - 1) for m >= 1
    return math.isqrt(math.ceil(n_neurons / k) - 1)


@dataclass(frozen=True)
class MosaicLayout:
    i: int
    k: int

    def __post_init__(self):
        if self.i < 0 or self.k <= 0:
            raise ConfigurationError("need i >= 0 and k > 0")

    @classmethod
    def for_neurons(cls, n_neurons, k):
        return cls(grid_parameter(n_neurons, k), k)

    @property
    def side(self):
        return 2 * self.i + 1

    @cached_property
    def neuron_tiles(self):
        return [(r, c) for r in range(0, self.side, 2) for c in range(0, self.side, 2)]

    @cached_property
    def router_tiles(self):
        return [(r, c) for r in range(self.side) for c in range(self.side) if r % 2 or c % 2]

    @property
    def n_neurons(self):
        return self.k * len(self.neuron_tiles)

    def tile_of(self, neuron):
        """Neuron-tile index ``(row, col)`` on the ``(i+1) x (i+1)`` tile lattice."""
        t = np.asarray(neuron) // self.k
        return t // (self.i + 1), t % (self.i + 1)

    def device_count(self):
        """Brute-force count of memory devices over every tile of the grid."""
        total = 0
        for r in range(self.side):
            for c in range(self.side):
                total += (NEURON_TILE_DEVICES if (r % 2 == 0 and c % 2 == 0) else ROUTING_TILE_DEVICES) * self.k ** 2
        return total

    def to_json(self, graph=None, path=None):
        doc = {
            "i": self.i,
            "k": self.k,
            "neuron_tiles": [list(t) for t in self.neuron_tiles],
            "router_tiles": [list(t) for t in self.router_tiles],
        }
        if graph is not None:
            doc["edges"] = sorted([int(a), int(b)] for a, b in graph.edges())
        text = json.dumps(doc)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def memory_footprint(n_neurons, k):
    """``(mf_mosaic, mf_reference, favorable)`` for ``n_neurons`` in tiles of ``k``."""
    i = grid_parameter(n_neurons, k)
    t = (i + 1) ** 2
    r = (2 * i + 1) ** 2 - t
    mf = t * NEURON_TILE_DEVICES * k ** 2 + r * ROUTING_TILE_DEVICES * k ** 2
    ref = n_neurons ** 2
    return mf, ref, mf < ref


def hop_matrix(layout: MosaicLayout, n=None):
    """Minimum Routing Tiles between every pair of neurons (Manhattan on the tile lattice)."""
    n = layout.n_neurons if n is None else n
    r, c = layout.tile_of(np.arange(n))
    return (np.abs(r[:, None] - r[None, :]) + np.abs(c[:, None] - c[None, :])).astype(np.int64)


def tile_graph(layout: MosaicLayout):
    """Directed grid graph where entering a Routing Tile costs 1 and a Neuron Tile 0."""
    g = nx.DiGraph()
    side = layout.side
    for r in range(side):
        for c in range(side):
            g.add_node((r, c))
            for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < side and 0 <= cc < side:
                    g.add_edge((r, c), (rr, cc), weight=1 if (rr % 2 or cc % 2) else 0)
    return g


def hop_matrix_bfs(layout: MosaicLayout):
    """Tile-level hop matrix from shortest paths on :func:`tile_graph`, expanded to neurons."""
    g = tile_graph(layout)
    tiles = layout.neuron_tiles
    m = len(tiles)
    th = np.zeros((m, m), dtype=np.int64)
    for a, src in enumerate(tiles):
        dist = nx.single_source_dijkstra_path_length(g, src)
        for b, dst in enumerate(tiles):
            th[a, b] = dist[dst]
    tile_idx = np.arange(layout.n_neurons) // layout.k
    return th[np.ix_(tile_idx, tile_idx)]


def mosaic_mask(H, beta):
    if beta <= 0:
        raise ConfigurationError("beta must be > 0")
    return np.expm1(beta * np.asarray(H, dtype=float))


def layout_regularizer(W, S, lam):
    W = np.asarray(W, dtype=float)
    S = np.asarray(S, dtype=float)
    if W.shape != S.shape:
        raise ConfigurationError("W and S shapes differ")
    return lam * float(np.sum(S * W ** 2))


def layout_regularizer_grad(W, S, lam):
    return 2.0 * lam * np.asarray(S) * np.asarray(W)


def prune(W, threshold=0.005, epoch=0, start_epoch=10, pruned=None):
    """Zero entries with ``|w| < threshold`` from ``start_epoch`` on.

    ``pruned`` is the boolean mask from earlier calls; entries in it stay zero.
    Returns ``(W', pruned')``.
    """
    W = np.array(W, dtype=float)
    pruned = np.zeros(W.shape, dtype=bool) if pruned is None else np.array(pruned, dtype=bool)
    if epoch >= start_epoch:
        pruned |= np.abs(W) < threshold
    W[pruned] = 0.0
    return W, pruned


def random_program(layout: MosaicLayout, p_n, p_r, rng):
    """Sample a connectivity graph from device HCS probabilities.

    Every neuron pair inside a tile is connected with probability ``p_n``. Each
    Routing Tile between two adjacent Neuron Tiles is open with probability
    ``p_r``; through an open channel every cross pair connects with ``p_n``.
    Returns ``(graph, stats)``.
    """
    for p in (p_n, p_r):
        if not 0 <= p <= 1:
            raise ConfigurationError("probabilities must lie in [0, 1]")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n, k = layout.n_neurons, layout.k
    H = hop_matrix(layout)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    iu, ju = np.triu_indices(n, 1)
    h = H[iu, ju]
    draw = rng.random(iu.shape[0]) < p_n
    side = layout.i + 1
    tile = np.arange(n) // k
    # one channel draw per adjacent tile pair
    channel = rng.random((side * side, side * side)) < p_r
    open_ = channel[np.minimum(tile[iu], tile[ju]), np.maximum(tile[iu], tile[ju])]
    keep = draw & ((h == 0) | ((h == 1) & open_))
    g.add_edges_from(zip(iu[keep].tolist(), ju[keep].tolist()))
    return g, graph_stats(g)


def graph_stats(g: nx.Graph):
    n = g.number_of_nodes()
    m = g.number_of_edges()
    stats = {
        "nodes": n,
        "edges": m,
        "density": nx.density(g) if n > 1 else 0.0,
        "clustering": nx.average_clustering(g) if n else 0.0,
    }
    if m:
        comp = g.subgraph(max(nx.connected_components(g), key=len))
        stats["largest_component"] = comp.number_of_nodes()
        stats["mean_shortest_path"] = nx.average_shortest_path_length(comp) if comp.number_of_nodes() > 1 else 0.0
    else:
        stats["largest_component"] = 1 if n else 0
        stats["mean_shortest_path"] = 0.0
    return stats


def er_baseline(g: nx.Graph, rng):
    """Erdos-Renyi graph with the same node and edge counts."""
    seed = int(np.random.default_rng(rng).integers(2 ** 31))
    return nx.gnm_random_graph(g.number_of_nodes(), g.number_of_edges(), seed=seed)


def noise_sigma(g_max, frac=0.05):
    return frac * g_max


def noisy_transfer(W, g_max, rng, frac=0.05, w_max=None):
    """Map weights linearly onto ``[-g_max, g_max]``, add ``N(0, frac*g_max)`` and map back."""
    W = np.asarray(W, dtype=float)
    w_max = float(np.max(np.abs(W))) if w_max is None else w_max
    if w_max == 0 or frac == 0:
        return W.copy()
    scale = g_max / w_max
    G = W * scale + rng.normal(0.0, noise_sigma(g_max, frac), size=W.shape)
    return G / scale


@dataclass(frozen=True)
class EnergyModel:
    e0_fj: int = 400
    e1_fj: int = 1600
    latency1_ns: float = 25.0

    def __post_init__(self):
        if self.e0_fj <= 0 or self.e1_fj <= 0 or self.latency1_ns <= 0:
            raise ConfigurationError("energy model constants must be positive")

    def spike_energy_fj(self, hops):
        return self.e0_fj if hops == 0 else hops * self.e1_fj


@dataclass(frozen=True)
class EnergyReport:
    energy_fj: int
    duration: float

    @property
    def energy_j(self):
        return self.energy_fj * 1e-15

    @property
    def power_pw(self):
        return self.energy_fj / 1000.0 / self.duration

    @property
    def power_w(self):
        return self.power_pw * 1e-12


def routing_energy(histogram, duration, model: EnergyModel = EnergyModel()) -> EnergyReport:
    """Energy of routing ``histogram[h]`` spikes over ``h`` hops within ``duration`` seconds."""
    if duration <= 0:
        raise ConfigurationError("duration must be > 0")
    total = 0
    for h, count in dict(histogram).items():
        h, count = int(h), int(count)
        if h < 0 or count < 0:
            raise ConfigurationError("hop counts and spike counts must be >= 0")
        total += count * model.spike_energy_fj(h)
    return EnergyReport(total, duration)


def hop_histogram(spike_counts, H, connectivity):
    """Deliveries per hop distance: each spike of neuron a reaches every b with ``connectivity[b, a]``."""
    spike_counts = np.asarray(spike_counts)
    conn = np.asarray(connectivity) != 0
    hist = {}
    for h in np.unique(H):
        sel = conn & (np.asarray(H).T == h)
        hist[int(h)] = int((sel * spike_counts[None, :]).sum())
    return hist


def write_energy_csv(path, histogram, report: EnergyReport, model: EnergyModel = EnergyModel()):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["hops", "spikes", "energy_fj"])
        for h in sorted(histogram):
            w.writerow([h, histogram[h], histogram[h] * model.spike_energy_fj(h)])
        w.writerow(["total", sum(histogram.values()), report.energy_fj])
