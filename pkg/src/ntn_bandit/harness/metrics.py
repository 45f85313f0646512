"""Hourly metric rows, CSV export and aggregation over seeds."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from ..heuristic import NetworkOutcome

CSV_COLUMNS = ("hour", "setting", "seed", "unsatisfied_fraction", "sum_throughput_bps",
               "tn_energy_wh", "active_mbs", "chosen_arm_index")
METRICS = ("unsatisfied_fraction", "sum_throughput_bps", "tn_energy_wh", "active_mbs")
NO_ARM = -1


@dataclass(frozen=True)
class HourlyMetrics:
    hour: int
    setting: str
    seed: int
    unsatisfied_fraction: float
    sum_throughput_bps: float
    tn_energy_wh: float
    active_mbs: float
    chosen_arm_index: int = NO_ARM

    def __post_init__(self):
        if not 0.0 <= self.unsatisfied_fraction <= 1.0:
            raise ValueError(f"unsatisfied fraction {self.unsatisfied_fraction} outside [0, 1]")

    @classmethod
    def from_outcomes(cls, hour: int, setting: str, seed: int, outcomes: Sequence[NetworkOutcome],
                      arm: int = NO_ARM) -> "HourlyMetrics":
        """Average of per-snapshot metrics; an hour without snapshots is all zero."""
        if not outcomes:
            return cls(hour, setting, seed, 0.0, 0.0, 0.0, 0.0, arm)
        return cls(
            hour, setting, seed,
            unsatisfied_fraction=float(np.mean([o.unsatisfied_fraction for o in outcomes])),
            sum_throughput_bps=float(np.mean([o.sum_throughput_bps for o in outcomes])),
            tn_energy_wh=float(np.mean([o.tn_energy_wh for o in outcomes])),
            active_mbs=float(np.mean([o.n_active for o in outcomes])),
            chosen_arm_index=arm,
        )


@dataclass(frozen=True)
class SummaryRow:
    hour: int
    setting: str
    n_seeds: int
    mean: dict
    ci_half_width: dict


def aggregate(rows: Iterable[HourlyMetrics], confidence: float = 0.95) -> list[SummaryRow]:
    """Mean and Student-t confidence half-width over seeds per (setting, hour)."""
    groups: dict[tuple[str, int], list[HourlyMetrics]] = {}
    for r in rows:
        groups.setdefault((r.setting, r.hour), []).append(r)
    out = []
    for (setting, hour), group in sorted(groups.items()):
        n = len(group)
        mean, half = {}, {}
        for m in METRICS:
            v = np.array([getattr(r, m) for r in group])
            mean[m] = float(v.mean())
            if n > 1:
                q = stats.t.ppf(0.5 + confidence / 2, n - 1)
                half[m] = float(q * v.std(ddof=1) / np.sqrt(n))
            else:
                half[m] = 0.0
        out.append(SummaryRow(hour, setting, n, mean, half))
    return out


def write_metrics_csv(rows: Iterable[HourlyMetrics], path: str | Path, append: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not (append and path.exists())
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            w.writeheader()
        for r in rows:
            w.writerow(asdict(r))
    return path


def read_metrics_csv(path: str | Path) -> list[HourlyMetrics]:
    casts = {"int": lambda v: int(float(v)), "float": float, "str": str}
    types = {f.name: casts[f.type] for f in fields(HourlyMetrics)}
    with open(path, newline="") as fh:
        return [HourlyMetrics(**{k: types[k](v) for k, v in rec.items()}) for rec in csv.DictReader(fh)]


def write_summary_csv(summary: Iterable[SummaryRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["hour", "setting", "n_seeds"]
    for m in METRICS:
        cols += [m, f"{m}_ci"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for s in summary:
            row = [s.hour, s.setting, s.n_seeds]
            for m in METRICS:
                row += [s.mean[m], s.ci_half_width[m]]
            w.writerow(row)
    return path
