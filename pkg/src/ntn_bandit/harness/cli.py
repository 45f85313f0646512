"""Command-line entry point.

All artifacts of a run live under one ``--out`` directory::

    corpus/                  snapshot store (generate, plus CSV copies with --csv)
    normalizer_seed<s>.json  cost normaliser (calibrate)
    policy_seed<s>.json      per-hour policy checkpoint (train)
    records.csv              every feedback record (train, appended)
    metrics.csv              hourly metrics per setting and seed
    summary.csv, daily_*.pdf mean and confidence band over seeds (plot)
    oracle_seed<s>.npz, regret.csv, regret_seed<s>.pdf  (oracle)
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..config import Config, ConfigError, load_config, preset
from .corpus import SnapshotStore, StoreError, generate_corpus
from .experiment import (Checkpoint, CostNormalizer, calibrate, checkpoint_path, evaluate, oracle_sweep,
                         policy_matrix, regret_report, run_benchmark, train, uniform_policy)
from .metrics import HourlyMetrics, aggregate, read_metrics_csv, write_metrics_csv, write_summary_csv
from .plotting import plot_daily_profiles, plot_regret

log = logging.getLogger("ntn_bandit")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def parse_hours(text: str | None) -> list[int]:
    """``"0-5,12,20-23"`` -> sorted hour list; ``None`` means all 24."""
    if text is None:
        return list(range(24))
    hours: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, _, hi = part.partition("-")
        try:
            a, b = int(lo), int(hi) if hi else int(lo)
        except ValueError as exc:
            raise ConfigError(f"bad hour selection {part!r}") from exc
        if not 0 <= a <= b <= 23:
            raise ConfigError(f"hours must lie in 0..23, got {part!r}")
        hours.update(range(a, b + 1))
    if not hours:
        raise ConfigError("empty hour selection")
    return sorted(hours)


def resolve_config(args) -> Config:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = preset("desk" if args.desk_scale else "full")
    if args.sequential:
        cfg = cfg.replace(bandit={"per_hour": False})
    return cfg


def seeds_of(args, cfg: Config) -> list[int]:
    return [args.seed] if args.seed is not None else list(cfg.experiment.seeds)


def _normalizer_path(out: Path, seed: int) -> Path:
    return out / f"normalizer_seed{seed}.json"


def _load_normalizer(out: Path, seed: int) -> CostNormalizer:
    path = _normalizer_path(out, seed)
    try:
        return CostNormalizer.from_dict(json.loads(path.read_text()))
    except FileNotFoundError as exc:
        raise StoreError(f"no cost normaliser at {path}; run calibrate first") from exc


def _load_checkpoint(out: Path, seed: int) -> Checkpoint:
    path = checkpoint_path(out, seed)
    try:
        return Checkpoint.load(path)
    except FileNotFoundError as exc:
        raise StoreError(f"no checkpoint at {path}; run train first") from exc
    except (ValueError, KeyError) as exc:
        raise StoreError(f"unreadable checkpoint {path}: {exc}") from exc


def merge_metrics(path: Path, rows: list[HourlyMetrics]) -> None:
    """Replace rows of the same (setting, seed, hour) and keep the rest."""
    keep = []
    if path.exists():
        new_keys = {(r.setting, r.seed, r.hour) for r in rows}
        keep = [r for r in read_metrics_csv(path) if (r.setting, r.seed, r.hour) not in new_keys]
    merged = sorted(keep + rows, key=lambda r: (r.setting, r.seed, r.hour))
    write_metrics_csv(merged, path)


def render(out: Path, fmt: str) -> list[Path]:
    rows = read_metrics_csv(out / "metrics.csv")
    summary = aggregate(rows)
    write_summary_csv(summary, out / "summary.csv")
    return plot_daily_profiles(summary, out, fmt)


# --- subcommands -----------------------------------------------------------

def cmd_generate(args, cfg, out):
    index = generate_corpus(cfg, out / "corpus", seeds_of(args, cfg), parse_hours(args.hours))
    if args.csv:
        store = SnapshotStore(out / "corpus", cfg)
        for entry in index["files"].values():
            store.export_csv(entry["hour"], entry["seed"])
    print(f"wrote {len(index['files'])} hour files, digest {index['digest'][:16]}")


def cmd_calibrate(args, cfg, out):
    store = SnapshotStore(out / "corpus", cfg)
    for seed in seeds_of(args, cfg):
        norm = calibrate(cfg, store, seed, parse_hours(args.hours))
        _normalizer_path(out, seed).write_text(json.dumps(norm.to_dict(), indent=2))
        print(f"seed {seed}: normaliser written")


def cmd_train(args, cfg, out):
    store = SnapshotStore(out / "corpus", cfg)
    for seed in seeds_of(args, cfg):
        path = checkpoint_path(out, seed)
        ckpt = None if args.fresh or not path.exists() else _load_checkpoint(out, seed)
        if ckpt is None and path.exists():
            path.unlink()
        norm = ckpt.normalizer if ckpt else _load_normalizer(out, seed)
        ckpt = train(cfg, store, seed, norm, parse_hours(args.hours), ckpt, path, out / "records.csv")
        print(f"seed {seed}: {len(ckpt.contexts)} hour contexts in {path}")


def cmd_evaluate(args, cfg, out):
    store = SnapshotStore(out / "corpus", cfg)
    if args.per_snapshot:
        cfg = cfg.replace(experiment={"sample_per_snapshot": True})
    rows = []
    for seed in seeds_of(args, cfg):
        rows += evaluate(cfg, store, _load_checkpoint(out, seed), parse_hours(args.hours), args.mode)
    merge_metrics(out / "metrics.csv", rows)
    for p in render(out, args.format):
        print(f"wrote {p}")


def cmd_benchmark(args, cfg, out):
    store = SnapshotStore(out / "corpus", cfg)
    which = ("tn", "ntn") if args.which == "both" else (args.which,)
    rows = []
    for seed in seeds_of(args, cfg):
        for w in which:
            rows += run_benchmark(cfg, store, seed, w, parse_hours(args.hours))
    merge_metrics(out / "metrics.csv", rows)
    print(f"wrote {len(rows)} rows to {out / 'metrics.csv'}")


def cmd_oracle(args, cfg, out):
    store = SnapshotStore(out / "corpus", cfg)
    hours = parse_hours(args.hours)
    with open(out / "regret.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "step", "hour", "oracle_loss", "infeasible", "policy", "regret", "violation"])
        for seed in seeds_of(args, cfg):
            ckpt = _load_checkpoint(out, seed)
            sweep = oracle_sweep(cfg, store, seed, ckpt.normalizer, hours, args.max_snapshots)
            np.savez(out / f"oracle_seed{seed}.npz", hours=sweep.hours, losses=sweep.losses,
                     violations=sweep.violations)
            kind = "argmax" if (args.mode or cfg.experiment.eval_mode) == "argmax" else "expected"
            policies = {"trained": policy_matrix(ckpt, sweep.hours, kind), "uniform": uniform_policy(sweep)}
            rep = regret_report(sweep, policies)
            for name, (r, v) in rep.curves.items():
                for t in range(len(r)):
                    w.writerow([seed, t, int(sweep.hours[t]), rep.oracle_losses[t], int(rep.infeasible[t]),
                                name, r[t], v[t]])
            print(f"seed {seed}: " + ", ".join(f"{k} R_T={rep.final(k)[0]:.3f} V_T={rep.final(k)[1]:.3f}"
                                               for k in rep.curves)
                  + f", infeasible steps {int(rep.infeasible.sum())}")
            plot_regret(rep.curves, out / f"regret_seed{seed}.{args.format}")


def cmd_plot(args, cfg, out):
    for p in render(out, args.format):
        print(f"wrote {p}")


COMMANDS = {
    "generate": (cmd_generate, "write the snapshot corpus"),
    "calibrate": (cmd_calibrate, "fit the per-hour cost normaliser"),
    "train": (cmd_train, "train the per-hour policies"),
    "evaluate": (cmd_evaluate, "evaluate trained policies on held-out snapshots"),
    "benchmark": (cmd_benchmark, "replay the 3GPP-TN / 3GPP-NTN reference settings"),
    "oracle": (cmd_oracle, "full-information sweep, oracle and regret curves"),
    "plot": (cmd_plot, "render the daily profiles from metrics.csv"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--desk-scale", action="store_true", help="use the desk-scale preset")
    common.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
    common.add_argument("--hours", help="hour selection, e.g. 0-5,20")
    common.add_argument("--mode", choices=("argmax", "sample"), help="arm choice at evaluation")
    common.add_argument("--out", default="runs", help="run directory")
    common.add_argument("--sequential", action="store_true", help="one learner across all hours")
    common.add_argument("--format", default="pdf", choices=("pdf", "svg"), help="figure format")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ntn-bandit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "generate":
            p.add_argument("--csv", action="store_true", help="also write a CSV copy of every hour file")
        if name == "train":
            p.add_argument("--fresh", action="store_true", help="ignore an existing checkpoint")
        if name == "evaluate":
            p.add_argument("--per-snapshot", action="store_true", help="draw an arm per snapshot")
        if name == "benchmark":
            p.add_argument("--which", choices=("tn", "ntn", "both"), default="both")
        if name == "oracle":
            p.add_argument("--max-snapshots", type=int, help="held-out snapshots swept per hour")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        cfg = resolve_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command][0](args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StoreError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
