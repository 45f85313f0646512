"""Snapshot corpus on disk.

Layout of a store directory::

    index.json            schema version, config digest, per-hour entries
    seed_<s>/hour_<hh>.npz
    seed_<s>/hour_<hh>.csv  optional plain-text copy (``export_csv``)

Each hour file holds the UE realisations of every snapshot of that hour
(positions, region, indoor flag, demand) stacked along the first axis; the
number of UEs is fixed per hour. Link gains are not stored: they are redrawn
from the recorded ``(seed, hour, index)`` fading stream when loading, which
reproduces the in-memory snapshot exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from ..config import Config
from ..network import Snapshot, SnapshotFactory
from ..scenario import UeSet

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
INDEX_NAME = "index.json"


class StoreError(OSError):
    """Missing or unreadable corpus files."""


def config_digest(cfg: Config) -> str:
    data = cfg.to_dict()
    # experiment bookkeeping does not change snapshot content
    data.pop("experiment", None)
    data.pop("bandit", None)
    data.pop("cost", None)
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]


def _hour_arrays(factory: SnapshotFactory, hour: int, seed: int, count: int) -> dict[str, np.ndarray]:
    k = factory.profile.ue_count_per_hour[hour]
    xy = np.zeros((count, k, 2))
    urban = np.zeros((count, k), bool)
    indoor = np.zeros((count, k), bool)
    demand = np.zeros((count, k))
    for i in range(count):
        ues = factory.ues(hour, i, seed)
        xy[i], urban[i], indoor[i], demand[i] = ues.xy, ues.urban, ues.indoor, ues.demand_bps
    return {"xy": xy, "urban": urban, "indoor": indoor, "demand_bps": demand,
            "index": np.arange(count), "hour": np.array(hour), "seed": np.array(seed)}


def _digest(arrays: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    for key in sorted(arrays):
        h.update(key.encode())
        h.update(np.ascontiguousarray(arrays[key]).tobytes())
    return h.hexdigest()


def generate_corpus(cfg: Config, out_dir: str | Path, seeds: list[int] | None = None,
                    hours: list[int] | None = None) -> dict:
    """Write ``snapshots_per_hour`` snapshots for each hour and seed."""
    out = Path(out_dir)
    factory = SnapshotFactory(cfg)
    seeds = list(cfg.experiment.seeds if seeds is None else seeds)
    hours = list(range(24) if hours is None else hours)
    count = cfg.experiment.snapshots_per_hour
    index = {"schema_version": SCHEMA_VERSION, "config_digest": config_digest(cfg),
             "snapshots_per_hour": count, "seeds": seeds, "hours": hours, "files": {}}
    try:
        for seed in seeds:
            (out / f"seed_{seed}").mkdir(parents=True, exist_ok=True)
            for hour in hours:
                arrays = _hour_arrays(factory, hour, seed, count)
                rel = f"seed_{seed}/hour_{hour:02d}.npz"
                np.savez(out / rel, **arrays)
                index["files"][rel] = {"seed": seed, "hour": hour, "count": count,
                                       "n_ues": int(arrays["xy"].shape[1]), "digest": _digest(arrays)}
                log.info("wrote %s", rel)
        (out / INDEX_NAME).write_text(json.dumps(index, indent=2, sort_keys=True))
    except OSError as exc:
        raise StoreError(f"cannot write corpus under {out}: {exc}") from exc
    index["digest"] = store_digest(index)
    return index


def store_digest(index: dict) -> str:
    parts = [f"{k}:{v['digest']}" for k, v in sorted(index["files"].items())]
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()


class SnapshotStore:
    def __init__(self, root: str | Path, cfg: Config):
        self.root = Path(root)
        self.factory = SnapshotFactory(cfg)
        path = self.root / INDEX_NAME
        try:
            self.index = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise StoreError(f"no corpus index at {path}") from exc
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreError(f"cannot read {path}: {exc}") from exc
        if self.index.get("schema_version") != SCHEMA_VERSION:
            raise StoreError(f"{path}: unsupported schema {self.index.get('schema_version')}")
        if self.index["config_digest"] != config_digest(cfg):
            log.warning("corpus at %s was generated with a different scenario config", self.root)

    @property
    def seeds(self) -> list[int]:
        return list(self.index["seeds"])

    @property
    def hours(self) -> list[int]:
        return list(self.index["hours"])

    def load_hour(self, hour: int, seed: int) -> list[Snapshot]:
        rel = f"seed_{seed}/hour_{hour:02d}.npz"
        path = self.root / rel
        try:
            with np.load(path) as data:
                arrays = {k: data[k] for k in data.files}
        except FileNotFoundError as exc:
            raise StoreError(f"missing corpus file {path}") from exc
        except (OSError, ValueError) as exc:
            raise StoreError(f"cannot read {path}: {exc}") from exc
        snaps = []
        for i in range(len(arrays["index"])):
            ues = UeSet(arrays["xy"][i], arrays["urban"][i], arrays["indoor"][i], arrays["demand_bps"][i])
            snaps.append(self.factory.from_ues(hour, int(arrays["index"][i]), seed, ues))
        return snaps

    def export_csv(self, hour: int, seed: int, path: str | Path | None = None) -> Path:
        """Write one row per (snapshot, UE) of an hour file for inspection."""
        rel = f"seed_{seed}/hour_{hour:02d}"
        path = Path(path) if path is not None else self.root / f"{rel}.csv"
        try:
            with np.load(self.root / f"{rel}.npz") as data:
                arrays = {k: data[k] for k in data.files}
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["snapshot", "ue", "x_m", "y_m", "urban", "indoor", "demand_bps"])
                for i, idx in enumerate(arrays["index"].tolist()):
                    for k in range(arrays["xy"].shape[1]):
                        x, y = arrays["xy"][i, k]
                        w.writerow([idx, k, repr(float(x)), repr(float(y)), int(arrays["urban"][i, k]),
                                    int(arrays["indoor"][i, k]), repr(float(arrays["demand_bps"][i, k]))])
        except OSError as exc:
            raise StoreError(f"cannot export {rel}: {exc}") from exc
        return path
