"""TOML run configuration.

A config file may hold any of the tables ``[pattern]``, ``[mnist]``, ``[rc]``,
``[node]``, ``[search]`` and ``[mosaic]``. Keys in ``[pattern]`` are passed to
the e-prop regressor as hyperparameters; ``[mnist]`` and ``[rc]`` keys map to
their classifier hyperparameters except the task-level keys listed below.
"""
from __future__ import annotations

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..device import ConfigurationError

SECTIONS = ("pattern", "mnist", "rc", "node", "search", "mosaic")
MNIST_TASK_KEYS = ("n_train", "n_test", "root")
RC_TASK_KEYS = ("n_per_class", "n_nodes", "sample_dt", "test_fraction", "epochs")


def load_config(path=None):
    """Parsed config with every known section present (empty if absent)."""
    doc = {}
    if path is not None:
        with open(Path(path), "rb") as fh:
            doc = tomllib.load(fh)
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    return {s: dict(doc.get(s, {})) for s in SECTIONS}


def split_keys(section, task_keys):
    """Split a section into ``(task-level, estimator-level)`` dicts."""
    task = {k: v for k, v in section.items() if k in task_keys}
    est = {k: v for k, v in section.items() if k not in task_keys}
    return task, est
