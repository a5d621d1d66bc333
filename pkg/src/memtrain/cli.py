"""Command-line entry point: ``memtrain run|sweep|dataset|mosaic``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .mosaic import MosaicLayout, hop_histogram, hop_matrix, memory_footprint, random_program, routing_energy, \
    write_energy_csv
from .tasks.config import MNIST_TASK_KEYS, RC_TASK_KEYS, load_config, split_keys
from .updates import VARIANTS

log = logging.getLogger("memtrain")

MNIST_GATE = 0.85
RC_GATES = {"float": 0.88, "icc": 0.80}


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _run_pattern(args, cfg, out):
    from .tasks.pattern import run_pattern_task

    res = run_pattern_task(args.scheme, args.device_mode, args.seed, cfg["pattern"] or None)
    stem = out / f"pattern_{args.scheme}_{args.device_mode}_seed{args.seed}"
    rows = [[e, repr(l)] for e, l in enumerate(res.loss_curve)]
    _write_rows(stem.with_suffix(".csv"), ["epoch", "mse"], rows)
    summary = res.as_dict()
    summary.pop("loss_curve")
    summary["success"] = bool(not res.failed and res.final_mse < 0.1)
    _write_json(stem.with_suffix(".json"), summary)
    log.info("final MSE %.4f, %d SET pulses", res.final_mse, res.sets)
    return summary["success"]


def _run_mnist(args, cfg, out):
    from .tasks.mnist import run_mnist_task

    task, hp = split_keys(cfg["mnist"], MNIST_TASK_KEYS)
    res = run_mnist_task(task.get("n_train", 5000), task.get("n_test", 1000), args.seed, task.get("root"), hp)
    stem = out / f"mnist_seed{args.seed}"
    rows = [[e, a, b] for e, (a, b) in enumerate(zip(res["train_accuracy"], res["test_accuracy"]))]
    _write_rows(stem.with_suffix(".csv"), ["epoch", "train_accuracy", "test_accuracy"], rows)
    res["success"] = bool(res["test_accuracy"][-1] >= MNIST_GATE)
    _write_json(stem.with_suffix(".json"), res)
    log.info("test accuracy %.4f", res["test_accuracy"][-1])
    return res["success"]


def _run_rc(args, cfg, out):
    from .tasks.reservoir import RcTaskConfig, VolatileNodeParams, run_rc_task

    task, hp = split_keys(cfg["rc"], RC_TASK_KEYS)
    mode = args.training_mode
    res = run_rc_task(mode, args.seed, RcTaskConfig(**task), VolatileNodeParams(**cfg["node"]), hp)
    stem = out / f"rc_{mode}_seed{args.seed}"
    rows = [[e, a, b] for e, (a, b) in enumerate(zip(res["train_accuracy"], res["test_accuracy"]))]
    _write_rows(stem.with_suffix(".csv"), ["epoch", "train_accuracy", "test_accuracy"], rows)
    res["success"] = bool(res["test_accuracy"][-1] >= RC_GATES[mode])
    _write_json(stem.with_suffix(".json"), res)
    log.info("test accuracy %.4f, weakest class %s", res["test_accuracy"][-1], res["weakest_class"])
    return res["success"]


def cmd_run(args):
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ok = {"pattern": _run_pattern, "mnist": _run_mnist, "rc": _run_rc}[args.task](args, cfg, out)
    return 0 if ok else 1


def cmd_sweep(args):
    from .tasks.pattern import run_pattern_task

    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, best = [], {}
    for scheme in args.schemes:
        for n in args.n_devices:
            for seed in range(args.seed, args.seed + args.seeds):
                hp = dict(cfg["pattern"], n_devices=n)
                r = run_pattern_task(scheme, args.device_mode, seed, hp)
                rows.append([scheme, n, seed, repr(r.final_mse), r.sets, r.resets, r.refreshes, int(r.failed)])
                key = f"{scheme}_n{n}"
                if not r.failed and (key not in best or r.final_mse < best[key]["final_mse"]):
                    best[key] = {"seed": seed, "final_mse": r.final_mse, "sets": r.sets}
                log.info("%s N=%d seed %d: MSE %.4f", scheme, n, seed, r.final_mse)
    _write_rows(out / "sweep.csv", ["scheme", "n_devices", "seed", "final_mse", "sets", "resets", "refreshes",
                                    "failed"], rows)
    _write_json(out / "sweep.json", {"device_mode": args.device_mode, "best_of": best})
    return 0 if best and all(math.isfinite(b["final_mse"]) for b in best.values()) else 1


def cmd_dataset_gen(args):
    from .tasks.reservoir import CLASSES, make_dataset

    trains, labels = make_dataset(args.n_per_class, args.seed)
    rows = [[i, CLASSES[lab], repr(float(t))] for i, (tr, lab) in enumerate(zip(trains, labels)) for t in tr]
    _write_rows(args.out, ["pattern", "label", "spike_time"], rows)
    log.info("wrote %d patterns to %s", len(labels), args.out)
    return 0


def cmd_mosaic_report(args):
    cfg = load_config(args.config)["mosaic"]
    n, k = cfg.get("neurons", args.neurons), cfg.get("k", args.k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    layout = MosaicLayout.for_neurons(n, k)
    graph, stats = random_program(layout, args.p_n, args.p_r, args.seed)
    layout.to_json(graph, out / "layout.json")
    mf, ref, fav = memory_footprint(n, k)
    H = hop_matrix(layout)
    conn = np.zeros_like(H)
    for a, b in graph.edges():
        conn[a, b] = conn[b, a] = 1
    spikes = np.full(layout.n_neurons, args.rate * args.duration)
    hist = hop_histogram(spikes, H, conn)
    report = routing_energy(hist, args.duration)
    write_energy_csv(out / "energy.csv", hist, report)
    _write_json(out / "report.json", {
        "neurons": n, "k": k, "i": layout.i, "memory_footprint": mf, "reference_footprint": ref,
        "favorable": fav, "graph": stats, "energy_fj": report.energy_fj, "power_pw": report.power_pw,
    })
    log.info("footprint %d vs %d devices, routing power %.1f pW", mf, ref, report.power_pw)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="memtrain", description="Memristive neuromorphic training simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train one task")
    r.add_argument("--task", choices=("pattern", "mnist", "rc"), default="pattern")
    r.add_argument("--scheme", choices=VARIANTS, default="mixed_precision")
    r.add_argument("--device-mode", choices=("pcm", "perf", "float"), default="pcm")
    r.add_argument("--training-mode", choices=("float", "icc"), default="icc", help="readout training for --task rc")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--config", help="TOML config file")
    r.add_argument("--out", default="results")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="pattern task over schemes and seeds")
    s.add_argument("--schemes", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    s.add_argument("--n-devices", nargs="+", type=int, default=[1])
    s.add_argument("--device-mode", choices=("pcm", "perf", "float"), default="pcm")
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--seed", type=int, default=0, help="first seed")
    s.add_argument("--config")
    s.add_argument("--out", default="results")
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("dataset", help="dataset utilities")
    dsub = d.add_subparsers(dest="action", required=True)
    g = dsub.add_parser("gen", help="generate the firing-pattern dataset as CSV")
    g.add_argument("--n-per-class", type=int, default=800)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="firing_patterns.csv")
    g.set_defaults(func=cmd_dataset_gen)

    m = sub.add_parser("mosaic", help="Mosaic analytics")
    msub = m.add_subparsers(dest="action", required=True)
    rep = msub.add_parser("report", help="layout, footprint and routing energy")
    rep.add_argument("--neurons", type=int, default=1024)
    rep.add_argument("--k", type=int, default=4)
    rep.add_argument("--p-n", type=float, default=0.5)
    rep.add_argument("--p-r", type=float, default=0.3)
    rep.add_argument("--rate", type=float, default=10.0, help="mean firing rate (Hz)")
    rep.add_argument("--duration", type=float, default=1.0)
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument("--config")
    rep.add_argument("--out", default="results")
    rep.set_defaults(func=cmd_mosaic_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
