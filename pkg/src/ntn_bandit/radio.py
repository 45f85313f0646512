"""Bandwidth split, PRB allocation, cell load and Shannon throughput."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# absorbs float error in share * W / prb before flooring
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class BandwidthSplit:
    total_hz: float
    epsilon: float
    prb_hz: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.total_hz <= 0 or self.prb_hz <= 0:
            raise ValueError("bandwidths must be > 0")

    @property
    def satellite_prbs(self) -> int:
        return int(math.floor(self.epsilon * self.total_hz / self.prb_hz + _FLOOR_EPS))

    @property
    def terrestrial_prbs(self) -> int:
        return int(math.floor((1.0 - self.epsilon) * self.total_hz / self.prb_hz + _FLOOR_EPS))


@dataclass(frozen=True)
class CellLoad:
    used_prbs: int
    total_prbs: int
    load: float


def split_bandwidth(total_hz: float, epsilon: float, prb_hz: float) -> tuple[int, int]:
    """PRBs per terrestrial MBS (full reuse) and for the satellite."""
    split = BandwidthSplit(total_hz, epsilon, prb_hz)
    return split.terrestrial_prbs, split.satellite_prbs


def prb_allocate(demand_bps, sinr, prb_hz: float):
    """PRBs needed to carry ``demand_bps`` at ``sinr``.

    Zero demand needs zero PRBs; positive demand at zero SINR is unservable
    and returned as ``inf``. Works elementwise on arrays.
    """
    demand = np.asarray(demand_bps, dtype=float)
    se = np.log2(1.0 + np.asarray(sinr, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.ceil(demand / (prb_hz * se))
    b = np.where(demand <= 0, 0.0, np.where(se > 0, b, np.inf))
    return float(b) if b.ndim == 0 else b


def throughput(prb_count, sinr, prb_hz: float):
    """Shannon throughput of ``prb_count`` PRBs at ``sinr``."""
    out = prb_hz * np.asarray(prb_count, dtype=float) * np.log2(1.0 + np.asarray(sinr, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def cell_load(prbs_requested, total_prbs: int) -> CellLoad:
    """Load of one cell; ``load`` keeps the unclipped ratio so overload shows."""
    if total_prbs < 1:
        raise ValueError("a cell needs at least one PRB")
    req = np.asarray(prbs_requested, dtype=float)
    req = req[np.isfinite(req)]
    total_req = float(req.sum())
    return CellLoad(int(min(total_req, total_prbs)), int(total_prbs), total_req / total_prbs)


def ration(prbs_requested: np.ndarray, priority: np.ndarray, budget: int) -> np.ndarray:
    """Grant PRBs within ``budget`` for the UEs of one cell.

    UEs are served in descending ``priority`` (RSRP) and receive their full
    request while it fits; the UEs left over share the remaining PRBs in
    proportion to their requests, rounded down. Unservable (``inf``) requests
    get nothing.
    """
    req = np.asarray(prbs_requested, dtype=float)
    granted = np.zeros_like(req)
    finite = np.isfinite(req)
    if finite.sum() == 0 or budget <= 0:
        return granted
    if req[finite].sum() <= budget:
        granted[finite] = req[finite]
        return granted
    idx = np.flatnonzero(finite)
    order = idx[np.argsort(-priority[idx], kind="stable")]
    csum = np.cumsum(req[order])
    n_full = int(np.searchsorted(csum, budget, side="right"))
    full, rest = order[:n_full], order[n_full:]
    granted[full] = req[full]
    leftover = budget - (csum[n_full - 1] if n_full else 0.0)
    rest_req = req[rest].sum()
    if rest_req > 0:
        granted[rest] = np.floor(leftover * req[rest] / rest_req)
    return granted
