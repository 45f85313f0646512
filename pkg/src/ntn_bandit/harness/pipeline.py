"""Single-pass run of every stage, one hour at a time.

Loads each hour once and feeds it through calibration, training,
evaluation, both benchmarks and (optionally) the full-information sweep.
This stays within memory at desk scale and avoids regenerating snapshots
for each stage; the numbers equal those of the stage-by-stage commands.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..bandit import ArmSpace, PolicyState
from ..config import Config
from .experiment import (Checkpoint, CostNormalizer, GeneratedSource, SnapshotSource, SweepResult,
                         benchmark_hour, calibrate_hour, evaluate_hour, hyperparameters, split_holdout,
                         sweep_snapshots, train_hour)
from .metrics import HourlyMetrics

log = logging.getLogger(__name__)

BCOMD_SETTING = "bcomd"
TN_SETTING = "3gpp-tn"
NTN_SETTING = "3gpp-ntn"


@dataclass
class SeedRun:
    seed: int
    rows: list[HourlyMetrics]
    checkpoint: Checkpoint
    sweep: SweepResult | None
    seconds: float


def run_seed(cfg: Config, seed: int, hours: Iterable[int] = range(24), sweep: bool = False,
             source: SnapshotSource | None = None, mode: str | None = None) -> SeedRun:
    t_start = time.perf_counter()
    source = source or GeneratedSource(cfg)
    arms = ArmSpace(cfg.bandit.grids)
    exp = cfg.experiment
    mode = mode or exp.eval_mode
    hours = list(hours)
    norm = CostNormalizer(np.zeros(24), np.zeros(24), cfg.cost.demand_baseline)
    ckpt = Checkpoint(seed, arms.to_dict(), norm, per_hour=cfg.bandit.per_hour)
    rows: list[HourlyMetrics] = []
    hs, fs, gs = [], [], []
    carried: PolicyState | None = None
    offset = 0
    for h in hours:
        train_snaps, test = split_holdout(source.load_hour(h, seed), exp.holdout_fraction)
        norm.lo[h], norm.hi[h] = calibrate_hour(train_snaps[: cfg.cost.calibration_snapshots], arms,
                                                cfg.cost.demand_baseline)
        horizon = len(train_snaps) * cfg.bandit.epochs
        if cfg.bandit.per_hour:
            state = PolicyState.initial(arms.n, hyperparameters(cfg, arms.n, horizon))
            offset = 0
        else:
            state = carried or PolicyState.initial(arms.n, hyperparameters(cfg, arms.n, horizon * len(hours)))
        state = train_hour(state, train_snaps, arms, norm, seed, h, cfg.bandit.epochs, step_offset=offset)
        ckpt.contexts[h] = state
        if not cfg.bandit.per_hour:
            carried = state
            offset += horizon

        arm, outcomes = evaluate_hour(state, test, arms, mode, seed, h, exp.sample_per_snapshot)
        rows.append(HourlyMetrics.from_outcomes(h, BCOMD_SETTING, seed, outcomes, arm))
        rows.append(HourlyMetrics.from_outcomes(h, TN_SETTING, seed, benchmark_hour(test, "tn")))
        rows.append(HourlyMetrics.from_outcomes(h, NTN_SETTING, seed, benchmark_hour(test, "ntn")))
        if sweep:
            part = test[: exp.oracle_snapshots_per_hour] if exp.oracle_snapshots_per_hour else test
            f, g = sweep_snapshots(part, arms, norm)
            hs.append(np.full(len(part), h))
            fs.append(f)
            gs.append(g)
        log.info("seed %d hour %d done", seed, h)
    result = None
    if sweep:
        result = SweepResult(np.concatenate(hs), np.vstack(fs), np.vstack(gs))
    return SeedRun(seed, rows, ckpt, result, time.perf_counter() - t_start)
