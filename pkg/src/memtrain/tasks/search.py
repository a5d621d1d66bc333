"""Seeded random hyperparameter search."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List

import numpy as np

from ..device import ConfigurationError


def sample_space(space: Dict[str, Any], rng: np.random.Generator) -> Dict[str, Any]:
    """Draw one configuration.

    Each entry is either a fixed value or a tuple ``(kind, ...)`` with kind
    ``"uniform"`` / ``"loguniform"`` (``lo, hi``), ``"int"`` (``lo, hi``
    inclusive) or ``"choice"`` (a sequence of options).
    """
    out = {}
    for name in sorted(space):
        spec = space[name]
        if not (isinstance(spec, (tuple, list)) and spec and isinstance(spec[0], str)
                and spec[0] in ("uniform", "loguniform", "int", "choice")):
            out[name] = spec
            continue
        kind = spec[0]
        if kind == "uniform":
            out[name] = float(rng.uniform(spec[1], spec[2]))
        elif kind == "loguniform":
            if spec[1] <= 0 or spec[2] <= 0:
                raise ConfigurationError(f"loguniform bounds for {name} must be positive")
            out[name] = float(math.exp(rng.uniform(math.log(spec[1]), math.log(spec[2]))))
        elif kind == "int":
            out[name] = int(rng.integers(spec[1], spec[2] + 1))
        else:
            options = list(spec[1])
            out[name] = options[int(rng.integers(len(options)))]
    return out


@dataclass
class SearchResult:
    best_params: Dict[str, Any]
    best_loss: float
    trials: List[Dict[str, Any]] = field(default_factory=list)


def random_search(task: Callable[[Dict[str, Any]], float], space: Dict[str, Any], n_trials: int, seed: int = 0,
                  log_path=None, include=()) -> SearchResult:
    """Evaluate ``task`` on ``n_trials`` sampled configurations and keep the lowest loss.

    ``include`` lists extra configurations evaluated before the random ones.
    Non-finite losses count as failures and never win. Every trial is
    appended to ``log_path`` as a JSON line when given.
    """
    if n_trials < 0:
        raise ConfigurationError("n_trials must be >= 0")
    rng = np.random.default_rng(seed)
    configs = [dict(c) for c in include] + [sample_space(space, rng) for _ in range(n_trials)]
    if not configs:
        raise ConfigurationError("nothing to evaluate")
    trials = []
    best, best_loss = None, math.inf
    fh = open(log_path, "a") if log_path is not None else None
    try:
        for idx, params in enumerate(configs):
            loss = task(params)
            loss = float(loss["loss"]) if isinstance(loss, dict) else float(loss)
            record = {"trial": idx, "loss": loss if math.isfinite(loss) else None, "params": params}
            trials.append(record)
            if fh is not None:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
                fh.flush()
            if math.isfinite(loss) and (best is None or loss < best_loss):
                best, best_loss = params, loss
    finally:
        if fh is not None:
            fh.close()
    if best is None:
        best = configs[0]
    return SearchResult(best, best_loss, trials)
