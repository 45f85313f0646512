"""Calibration, training, evaluation, benchmark replay and oracle sweeps.

Every stage works hour by hour on a list of snapshots obtained from a
*source*: either a :class:`SnapshotStore` on disk or a
:class:`SnapshotFactory` generating on the fly. Both yield identical
snapshots for the same config, so in-memory runs and store-backed runs
produce the same numbers.
"""

from __future__ import annotations

import csv
import json
import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from ..bandit import (BCOMD, ArmSpace, FeedbackRecord, Hyperparameters, PolicyState,
                      oracle_policy, regret_and_violation, sample_action)
from ..config import Config
from ..heuristic import NetworkOutcome, evaluate_arm, evaluate_benchmark
from ..network import Snapshot, SnapshotFactory
from .metrics import NO_ARM, HourlyMetrics

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "ntn-bandit-policy"
CHECKPOINT_VERSION = 1
RECORD_COLUMNS = ("seed", "hour", "t", "arm", "cost", "violation", "x_at", "lambda")

# extra rng stream keys, disjoint from the snapshot streams
_ORDER, _ACTION, _EVAL = 101, 102, 103


class SnapshotSource(Protocol):
    def load_hour(self, hour: int, seed: int) -> list[Snapshot]: ...


class GeneratedSource:
    """Snapshots produced on demand, never touching the disk."""

    def __init__(self, cfg: Config, factory: SnapshotFactory | None = None):
        self.factory = factory or SnapshotFactory(cfg)
        self.count = cfg.experiment.snapshots_per_hour

    def load_hour(self, hour: int, seed: int) -> list[Snapshot]:
        return self.factory.hour_snapshots(hour, seed, self.count)


def split_holdout(snaps: Sequence[Snapshot], fraction: float) -> tuple[list[Snapshot], list[Snapshot]]:
    """Last ``fraction`` of each hour is held out; at least one snapshot on
    each side when there are two or more."""
    n = len(snaps)
    n_test = int(round(fraction * n)) if fraction > 0 else 0
    if n >= 2 and fraction > 0:
        n_test = min(max(n_test, 1), n - 1)
    return list(snaps[: n - n_test]), list(snaps[n - n_test:])


# --- cost normalisation ----------------------------------------------------

@dataclass
class CostNormalizer:
    """Per-hour affine map of raw cost into [0, 1].

    With ``baseline`` the snapshot's log-demand sum is added first: it is
    the same for every arm on a snapshot, so it leaves arm rankings alone
    and only removes snapshot-to-snapshot variance of the feedback.
    """

    lo: np.ndarray
    hi: np.ndarray
    baseline: bool = True

    def shifted(self, raw_cost: float, snap: Snapshot) -> float:
        return raw_cost + (snap.log_demand_sum if self.baseline else 0.0)

    def __call__(self, raw_cost: float, snap: Snapshot) -> float:
        h = snap.hour
        span = self.hi[h] - self.lo[h]
        if not span > 0:
            return 0.0
        return float(np.clip((self.shifted(raw_cost, snap) - self.lo[h]) / span, 0.0, 1.0))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist(), "baseline": self.baseline}

    @classmethod
    def from_dict(cls, data: dict) -> "CostNormalizer":
        return cls(np.asarray(data["lo"], float), np.asarray(data["hi"], float), bool(data["baseline"]))

    @classmethod
    def identity(cls, baseline: bool = False) -> "CostNormalizer":
        return cls(np.zeros(24), np.ones(24), baseline)


def calibrate_hour(snaps: Sequence[Snapshot], arms: ArmSpace, baseline: bool) -> tuple[float, float]:
    """(min, max) shifted raw cost of every arm over ``snaps``."""
    probe = CostNormalizer.identity(baseline)
    values = [probe.shifted(evaluate_arm(s, theta).raw_cost, s) for s in snaps for theta in arms.arms]
    if not values:
        return 0.0, 0.0
    return float(min(values)), float(max(values))


def calibrate(cfg: Config, source: SnapshotSource, seed: int,
              hours: Iterable[int] = range(24)) -> CostNormalizer:
    arms = ArmSpace(cfg.bandit.grids)
    norm = CostNormalizer(np.zeros(24), np.zeros(24), cfg.cost.demand_baseline)
    for h in hours:
        train, _ = split_holdout(source.load_hour(h, seed), cfg.experiment.holdout_fraction)
        norm.lo[h], norm.hi[h] = calibrate_hour(train[: cfg.cost.calibration_snapshots], arms,
                                                cfg.cost.demand_baseline)
    return norm


# --- policy checkpoints ----------------------------------------------------

@dataclass
class Checkpoint:
    seed: int
    grids: dict
    normalizer: CostNormalizer
    contexts: dict[int, PolicyState] = field(default_factory=dict)
    per_hour: bool = True

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "seed": self.seed,
            "per_hour": self.per_hour,
            "grids": self.grids,
            "normalizer": self.normalizer.to_dict(),
            "contexts": {str(h): st.to_dict() for h, st in sorted(self.contexts.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Checkpoint":
        if data.get("format") != CHECKPOINT_FORMAT or data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint {data.get('format')} v{data.get('version')}")
        return cls(int(data["seed"]), data["grids"], CostNormalizer.from_dict(data["normalizer"]),
                   {int(h): PolicyState.from_dict(st) for h, st in data["contexts"].items()},
                   bool(data["per_hour"]))

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(self.to_dict()))
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        return cls.from_dict(json.loads(Path(path).read_text()))


def checkpoint_path(out_dir: str | Path, seed: int) -> Path:
    return Path(out_dir) / f"policy_seed{seed}.json"


class RecordWriter:
    """Appends feedback records to a CSV file."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self._fh = None
        self._w = None

    def __enter__(self):
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            new = not self.path.exists()
            self._fh = open(self.path, "a", newline="")
            self._w = csv.writer(self._fh)
            if new:
                self._w.writerow(RECORD_COLUMNS)
        return self

    def __call__(self, seed: int, hour: int, rec: FeedbackRecord) -> None:
        if self._w is not None:
            self._w.writerow((seed, hour, rec.t, rec.arm, rec.cost, rec.violation, rec.x_at, rec.lam))

    def __exit__(self, *exc):
        if self._fh is not None:
            self._fh.close()


# --- training --------------------------------------------------------------

def hyperparameters(cfg: Config, n_arms: int, horizon: int) -> Hyperparameters:
    b = cfg.bandit
    return Hyperparameters.defaults(n_arms, horizon, b.eta, b.gamma, b.omega, b.mu)


def training_schedule(n_train: int, epochs: int, seed: int, hour: int) -> np.ndarray:
    """Snapshot visiting order: a fresh permutation per epoch."""
    rng = np.random.default_rng([seed, hour, _ORDER])
    if n_train == 0:
        return np.zeros(0, dtype=int)
    return np.concatenate([rng.permutation(n_train) for _ in range(epochs)])


def train_hour(state: PolicyState, snaps: Sequence[Snapshot], arms: ArmSpace,
               normalizer: CostNormalizer, seed: int, hour: int, epochs: int = 1,
               on_record: Callable[[int, int, FeedbackRecord], None] | None = None,
               step_offset: int = 0) -> PolicyState:
    """Run one BCOMD step per scheduled snapshot.

    The action rng of step ``t`` is keyed on ``(seed, hour, t)``, so a run
    resumed from a checkpoint at step ``t`` continues exactly as an
    uninterrupted run would. ``step_offset`` shifts those keys; it lets a
    single learner carried across hours use globally unique step indices.
    """
    learner = BCOMD(arms.n, state.hyper, state)
    schedule = training_schedule(len(snaps), epochs, seed, hour)
    start = state.t - step_offset
    for t in range(max(start, 0), len(schedule)):
        snap = snaps[schedule[t]]
        rng = np.random.default_rng([seed, hour, _ACTION, t])
        arm = learner.select(rng)
        outcome = evaluate_arm(snap, arms[arm], normalizer=normalizer)
        rec = learner.update(arm, outcome.cost, outcome.violation)
        if on_record is not None:
            on_record(seed, hour, rec)
    return learner.state


def train(cfg: Config, source: SnapshotSource, seed: int, normalizer: CostNormalizer,
          hours: Iterable[int] = range(24), checkpoint: Checkpoint | None = None,
          checkpoint_file: str | Path | None = None,
          records_file: str | Path | None = None) -> Checkpoint:
    """Train per-hour learners (or one sequential learner) for one seed.

    An existing checkpoint is resumed: finished hours are skipped and a
    partially trained hour continues from its step counter. The checkpoint
    is rewritten after every hour.
    """
    arms = ArmSpace(cfg.bandit.grids)
    epochs = cfg.bandit.epochs
    per_hour = cfg.bandit.per_hour
    ckpt = checkpoint or Checkpoint(seed, arms.to_dict(), normalizer, per_hour=per_hour)
    if ckpt.per_hour != per_hour:
        raise ValueError("checkpoint was trained with a different context mode")
    hours = list(hours)
    carried: PolicyState | None = None
    offset = 0
    with RecordWriter(records_file) as sink:
        for h in hours:
            train_snaps, _ = split_holdout(source.load_hour(h, seed), cfg.experiment.holdout_fraction)
            horizon = len(train_snaps) * epochs
            if per_hour:
                state = ckpt.contexts.get(h) or PolicyState.initial(arms.n, hyperparameters(cfg, arms.n, horizon))
                offset = 0
            else:
                if carried is None:
                    total = horizon * len(hours)
                    carried = PolicyState.initial(arms.n, hyperparameters(cfg, arms.n, total))
                done = ckpt.contexts.get(h)
                state = done if done is not None else carried
            if state.t - offset >= horizon:
                log.info("seed %d hour %d already trained (t=%d)", seed, h, state.t)
            else:
                t0 = time.perf_counter()
                state = train_hour(state, train_snaps, arms, ckpt.normalizer, seed, h, epochs, sink, offset)
                log.info("seed %d hour %d trained %d steps in %.1fs", seed, h, horizon, time.perf_counter() - t0)
            ckpt.contexts[h] = state
            if not per_hour:
                carried = state
                offset += horizon
            if checkpoint_file is not None:
                ckpt.save(checkpoint_file)
    return ckpt


# --- evaluation ------------------------------------------------------------

def choose_arm(state: PolicyState, mode: str, rng: np.random.Generator) -> int:
    if mode == "argmax":
        return int(np.argmax(state.x))
    if mode == "sample":
        return sample_action(state, rng)
    raise ValueError(f"unknown evaluation mode {mode!r}")


def evaluate_hour(state: PolicyState, snaps: Sequence[Snapshot], arms: ArmSpace, mode: str,
                  seed: int, hour: int, per_snapshot: bool = False,
                  normalizer: CostNormalizer | None = None) -> tuple[int, list[NetworkOutcome]]:
    """Evaluate the hour's policy on held-out snapshots.

    Returns the chosen arm (or ``NO_ARM`` when one is drawn per snapshot)
    and the per-snapshot outcomes.
    """
    rng = np.random.default_rng([seed, hour, _EVAL])
    if per_snapshot:
        picks = [choose_arm(state, mode, rng) for _ in snaps]
        return NO_ARM, [evaluate_arm(s, arms[a], normalizer=normalizer) for s, a in zip(snaps, picks)]
    arm = choose_arm(state, mode, rng)
    return arm, [evaluate_arm(s, arms[arm], normalizer=normalizer) for s in snaps]


def evaluate(cfg: Config, source: SnapshotSource, checkpoint: Checkpoint,
             hours: Iterable[int] = range(24), mode: str | None = None,
             setting: str = "bcomd") -> list[HourlyMetrics]:
    arms = ArmSpace(checkpoint.grids)
    mode = mode or cfg.experiment.eval_mode
    rows = []
    for h in hours:
        if h not in checkpoint.contexts:
            raise KeyError(f"checkpoint has no policy for hour {h}")
        _, test = split_holdout(source.load_hour(h, checkpoint.seed), cfg.experiment.holdout_fraction)
        arm, outcomes = evaluate_hour(checkpoint.contexts[h], test, arms, mode, checkpoint.seed, h,
                                      cfg.experiment.sample_per_snapshot)
        rows.append(HourlyMetrics.from_outcomes(h, setting, checkpoint.seed, outcomes, arm))
    return rows


def benchmark_hour(snaps: Sequence[Snapshot], which: str) -> list[NetworkOutcome]:
    return [evaluate_benchmark(s, which) for s in snaps]


def run_benchmark(cfg: Config, source: SnapshotSource, seed: int, which: str,
                  hours: Iterable[int] = range(24)) -> list[HourlyMetrics]:
    """Replay a reference setting on the held-out snapshots of each hour."""
    rows = []
    for h in hours:
        _, test = split_holdout(source.load_hour(h, seed), cfg.experiment.holdout_fraction)
        rows.append(HourlyMetrics.from_outcomes(h, f"3gpp-{which}", seed, benchmark_hour(test, which)))
    return rows


# --- full-information sweeps -----------------------------------------------

@dataclass
class SweepResult:
    """Normalised cost and violation of every arm on every swept snapshot."""

    hours: np.ndarray  # (S,)
    losses: np.ndarray  # (S, n)
    violations: np.ndarray  # (S, n)

    def oracle(self):
        return oracle_policy(self.losses, self.violations)


def sweep_snapshots(snaps: Sequence[Snapshot], arms: ArmSpace,
                    normalizer: CostNormalizer) -> tuple[np.ndarray, np.ndarray]:
    f = np.zeros((len(snaps), arms.n))
    g = np.zeros((len(snaps), arms.n))
    for i, s in enumerate(snaps):
        for a, theta in enumerate(arms.arms):
            o = evaluate_arm(s, theta, normalizer=normalizer)
            f[i, a], g[i, a] = o.cost, o.violation
    return f, g


def estimate_sweep_seconds(snaps: Sequence[Snapshot], arms: ArmSpace, normalizer: CostNormalizer,
                           total_snapshots: int) -> float:
    if not snaps:
        return 0.0
    t0 = time.perf_counter()
    sweep_snapshots(snaps[:1], arms, normalizer)
    return (time.perf_counter() - t0) * total_snapshots


def oracle_sweep(cfg: Config, source: SnapshotSource, seed: int, normalizer: CostNormalizer,
                 hours: Iterable[int] = range(24), max_per_hour: int | None = None) -> SweepResult:
    """Evaluate every arm on the held-out snapshots of each hour."""
    arms = ArmSpace(cfg.bandit.grids)
    hours = list(hours)
    limit = max_per_hour if max_per_hour is not None else cfg.experiment.oracle_snapshots_per_hour
    hs, fs, gs = [], [], []
    checked = False
    for h in hours:
        _, test = split_holdout(source.load_hour(h, seed), cfg.experiment.holdout_fraction)
        test = test[:limit] if limit is not None else test
        if not checked:
            est = estimate_sweep_seconds(test, arms, normalizer, len(test) * len(hours))
            if est > cfg.experiment.oracle_budget_s:
                warnings.warn(f"oracle sweep estimated at {est:.0f}s exceeds the "
                              f"{cfg.experiment.oracle_budget_s:.0f}s budget", RuntimeWarning, stacklevel=2)
            checked = True
        f, g = sweep_snapshots(test, arms, normalizer)
        hs.append(np.full(len(test), h))
        fs.append(f)
        gs.append(g)
    n = arms.n
    return SweepResult(np.concatenate(hs) if hs else np.zeros(0, int),
                       np.vstack(fs) if fs else np.zeros((0, n)),
                       np.vstack(gs) if gs else np.zeros((0, n)))


def policy_matrix(checkpoint: Checkpoint, hours: np.ndarray, mode: str = "expected") -> np.ndarray:
    """Per-step arm distribution of a trained policy on a sweep.

    ``expected`` uses the hour's learned ``x``; ``argmax`` a point mass on
    its mode.
    """
    n = len(next(iter(checkpoint.contexts.values())).x)
    out = np.zeros((len(hours), n))
    for i, h in enumerate(hours.tolist()):
        x = checkpoint.contexts[h].x
        if mode == "argmax":
            out[i, int(np.argmax(x))] = 1.0
        elif mode == "expected":
            out[i] = x
        else:
            raise ValueError(f"unknown policy mode {mode!r}")
    return out


@dataclass
class RegretReport:
    oracle_losses: np.ndarray
    infeasible: np.ndarray
    curves: dict  # name -> (R curve, V curve)

    def final(self, name: str) -> tuple[float, float]:
        r, v = self.curves[name]
        return (float(r[-1]), float(v[-1])) if len(r) else (0.0, 0.0)


def regret_report(sweep: SweepResult, policies: dict[str, np.ndarray]) -> RegretReport:
    """Regret and violation of policies given as per-step arm distributions."""
    orc = sweep.oracle()
    curves = {}
    for name, p in policies.items():
        cost = np.sum(p * sweep.losses, axis=1)
        viol = np.sum(p * sweep.violations, axis=1)
        curves[name] = regret_and_violation(cost, viol, orc.losses)
    return RegretReport(orc.losses, orc.infeasible, curves)


def uniform_policy(sweep: SweepResult) -> np.ndarray:
    n = sweep.losses.shape[1]
    return np.full(sweep.losses.shape, 1.0 / n) if n else sweep.losses.copy()
