"""Arm evaluation: max-RSRP start, load pricing, satellite offload and cost.

Given a snapshot and an arm ``theta = (epsilon, tau_nu, tau_rsrp, alpha)``
the network is configured in four passes:

1. every UE attaches to its strongest covered MBS and loads are computed
   with the PRB budgets implied by ``epsilon``;
2. every UE re-attaches to the MBS maximising ``RSRP - alpha * load`` using
   the loads of pass 1, then loads are recomputed;
3. terrestrial MBSs are visited in ascending load order and shut down when
   their load plus the satellite load is within ``tau_nu`` and all their UEs
   see the satellite at ``tau_rsrp`` or better; the satellite load is
   updated after each shutdown;
4. PRBs are granted (rationed on overloaded cells), throughputs, power,
   cost and violation are computed.

A terrestrial MBS that ends up serving nobody transmits nothing, so it
draws only its baseline power and does not interfere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .energy import mbs_powers, tn_energy
from .network import Snapshot, SystemParams
from .radio import BandwidthSplit, prb_allocate, ration

OUT_OF_COVERAGE = -1
_RATE_TOL = 1e-12
_MIN_RATE_BPS = 1.0


@dataclass(frozen=True)
class ThetaConfig:
    epsilon: float
    tau_nu: float
    tau_rsrp_dbm: float
    alpha: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.epsilon, self.tau_nu, self.tau_rsrp_dbm, self.alpha)


class Normalizer(Protocol):
    def __call__(self, raw_cost: float, snapshot: Snapshot) -> float: ...


@dataclass(frozen=True, eq=False)
class NetworkOutcome:
    association: np.ndarray  # (K,), OUT_OF_COVERAGE or MBS index (M = satellite)
    active_mbs: np.ndarray  # (M,) bool, terrestrial MBSs transmitting
    shutdown: np.ndarray  # (M,) bool, switched off by the offload pass
    per_ue_throughput: np.ndarray
    per_ue_satisfied: np.ndarray
    granted_prbs: np.ndarray
    loads: np.ndarray  # (M + 1,) unclipped
    mbs_power_w: np.ndarray  # (M,)
    raw_cost: float
    violation: float
    cost: float | None = None
    slot_duration_s: float = 3600.0

    @property
    def tn_power_w(self) -> float:
        return float(self.mbs_power_w.sum())

    @property
    def tn_energy_wh(self) -> float:
        return tn_energy(self.mbs_power_w, self.slot_duration_s)

    @property
    def sum_throughput_bps(self) -> float:
        return float(self.per_ue_throughput.sum())

    @property
    def unsatisfied_fraction(self) -> float:
        return self.violation

    @property
    def n_active(self) -> int:
        return int(self.active_mbs.sum())


# --- building blocks -------------------------------------------------------

def prb_budgets(system: SystemParams, n_terrestrial: int, terrestrial_prbs: int,
                satellite_prbs: int) -> np.ndarray:
    return np.r_[np.full(n_terrestrial, terrestrial_prbs, dtype=float), float(satellite_prbs)]


def associate(score: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """Row-wise argmax of ``score`` over allowed links; lowest index wins ties."""
    if score.shape[0] == 0:
        return np.zeros(0, dtype=int)
    masked = np.where(allowed, score, -np.inf)
    assoc = np.argmax(masked, axis=1)
    assoc[~allowed.any(axis=1)] = OUT_OF_COVERAGE
    return assoc


def serving_sinr(snap: Snapshot, assoc: np.ndarray, transmitting: np.ndarray) -> np.ndarray:
    """SINR of each UE on its serving link.

    Terrestrial links see every other transmitting terrestrial MBS; the
    satellite band is orthogonal and carries no co-tier interference.
    """
    m = snap.n_terrestrial
    k = len(assoc)
    out = np.zeros(k)
    served = assoc >= 0
    if not served.any():
        return out
    rows = np.flatnonzero(served)
    cols = assoc[served]
    signal = snap.rx_w[rows, cols]
    total = snap.rx_w[rows, :m] @ transmitting.astype(float)
    own = np.where(cols < m, signal * transmitting[np.minimum(cols, m - 1)], 0.0)
    interference = np.where(cols < m, np.maximum(total - own, 0.0), 0.0)
    out[rows] = signal / (interference + snap.system.noise_w)
    return out


def requested_prbs(snap: Snapshot, assoc: np.ndarray, sinr: np.ndarray) -> np.ndarray:
    req = prb_allocate(snap.ues.demand_bps, sinr, snap.system.prb_hz)
    return np.where(assoc >= 0, req, 0.0)


def raw_loads(assoc: np.ndarray, requests: np.ndarray, budgets: np.ndarray) -> np.ndarray:
    """Unclipped loads; unservable requests are left out."""
    ok = (assoc >= 0) & np.isfinite(requests)
    used = np.bincount(assoc[ok], weights=requests[ok], minlength=len(budgets))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(budgets > 0, used / budgets, 0.0)


def transmitting_mask(assoc: np.ndarray, m: int) -> np.ndarray:
    t = assoc[(assoc >= 0) & (assoc < m)]
    return np.bincount(t, minlength=m)[:m] > 0


def serve(snap: Snapshot, assoc: np.ndarray, budgets: np.ndarray,
          shutdown: np.ndarray | None = None, *, zeta: float | None = None,
          normalizer: Normalizer | None = None) -> NetworkOutcome:
    """Grant PRBs for a fixed association and compute every outcome metric."""
    system = snap.system
    m = snap.n_terrestrial
    k = snap.n_ues
    if shutdown is None:
        shutdown = np.zeros(m, bool)
    transmitting = transmitting_mask(assoc, m)
    sinr = serving_sinr(snap, assoc, transmitting)
    req = requested_prbs(snap, assoc, sinr)
    loads = raw_loads(assoc, req, budgets)

    granted = np.where(np.isfinite(req), req, 0.0)
    for j in np.flatnonzero(loads > 1.0):
        members = np.flatnonzero(assoc == j)
        granted[members] = ration(req[members], snap.rsrp_dbm[members, j], int(budgets[j]))

    rate = system.prb_hz * granted * np.log2(1.0 + sinr)
    served = assoc >= 0
    serving_rsrp = np.where(served, snap.rsrp_dbm[np.arange(k), np.maximum(assoc, 0)], -np.inf)
    satisfied = (served & (serving_rsrp >= system.rsrp_min_dbm)
                 & (rate >= snap.ues.demand_bps * (1.0 - _RATE_TOL)))

    used_prbs = np.bincount(assoc[served & (assoc < m)], weights=granted[served & (assoc < m)],
                            minlength=m)[:m]
    tx = system.power.tx_power(used_prbs * system.subcarriers_per_prb)
    power = mbs_powers(system.power, tx)

    if zeta is None:
        zeta = system.zeta_scale / k if k else 0.0
    raw = zeta * float(power.sum()) - float(np.sum(np.log(np.maximum(rate, _MIN_RATE_BPS))))
    violation = float(np.count_nonzero(~satisfied)) / k if k else 0.0
    outcome = NetworkOutcome(
        association=assoc,
        active_mbs=tx > 0,
        shutdown=shutdown,
        per_ue_throughput=rate,
        per_ue_satisfied=satisfied,
        granted_prbs=granted,
        loads=loads,
        mbs_power_w=power,
        raw_cost=raw,
        violation=violation,
        slot_duration_s=system.slot_duration_s,
    )
    if normalizer is not None:
        object.__setattr__(outcome, "cost", float(normalizer(raw, snap)))
    return outcome


# --- the four passes -------------------------------------------------------

def _initial(snap: Snapshot, sat_on: bool, ter_on: bool):
    """Max-RSRP association and PRB requests; independent of everything in
    theta except which tiers have spectrum."""
    key = ("init", sat_on, ter_on)
    if key not in snap.cache:
        m = snap.n_terrestrial
        tier_ok = np.r_[np.full(m, ter_on), sat_on]
        allowed = snap.covered & tier_ok[None, :]
        assoc = associate(snap.rsrp_dbm, allowed)
        sinr = serving_sinr(snap, assoc, transmitting_mask(assoc, m))
        snap.cache[key] = (allowed, assoc, requested_prbs(snap, assoc, sinr))
    return snap.cache[key]


def _satellite_requests(snap: Snapshot) -> np.ndarray:
    if "sat_req" not in snap.cache:
        m = snap.n_terrestrial
        snr = snap.rx_w[:, m] / snap.system.noise_w
        snap.cache["sat_req"] = prb_allocate(snap.ues.demand_bps, snr, snap.system.prb_hz)
    return snap.cache["sat_req"]


def theta_budgets(snap: Snapshot, theta: ThetaConfig) -> np.ndarray:
    split = BandwidthSplit(snap.system.total_bandwidth_hz, theta.epsilon, snap.system.prb_hz)
    return prb_budgets(snap.system, snap.n_terrestrial, split.terrestrial_prbs, split.satellite_prbs)


def init_max_rsrp(snap: Snapshot, theta: ThetaConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pass 1: association and loads under max-RSRP."""
    budgets = theta_budgets(snap, theta)
    _, assoc, req = _initial(snap, budgets[-1] > 0, budgets[0] > 0 if snap.n_terrestrial else False)
    return assoc, raw_loads(assoc, req, budgets)


def price(rsrp_dbm, alpha: float, load):
    """Load-aware association score in dB."""
    return np.asarray(rsrp_dbm) - alpha * np.asarray(load)


def associate_pricing(snap: Snapshot, theta: ThetaConfig,
                      initial_loads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pass 2: re-attach every UE by price, then recompute loads."""
    budgets = theta_budgets(snap, theta)
    allowed, _, _ = _initial(snap, budgets[-1] > 0, budgets[0] > 0 if snap.n_terrestrial else False)
    if snap.n_ues == 0:
        return np.zeros(0, dtype=int), np.zeros(len(budgets))
    assoc = associate(price(snap.rsrp_dbm, theta.alpha, initial_loads[None, :]), allowed)
    sinr = serving_sinr(snap, assoc, transmitting_mask(assoc, snap.n_terrestrial))
    return assoc, raw_loads(assoc, requested_prbs(snap, assoc, sinr), budgets)


def shutdown_pass(snap: Snapshot, theta: ThetaConfig, assoc: np.ndarray,
                  loads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pass 3: offload light terrestrial cells to the satellite.

    Returns the new association and the shutdown mask.
    """
    m = snap.n_terrestrial
    budgets = theta_budgets(snap, theta)
    sat_prbs = budgets[-1]
    on_t = (assoc >= 0) & (assoc < m)
    blocked = on_t & (snap.rsrp_dbm[:, m] < theta.tau_rsrp_dbm)
    n_blocked = np.bincount(assoc[blocked], minlength=m)[:m]
    n_users = np.bincount(assoc[on_t], minlength=m)[:m]
    sat_add = np.bincount(assoc[on_t], weights=_satellite_requests(snap)[on_t], minlength=m)[:m]

    shut = np.zeros(m, bool)
    nu_sat = float(loads[-1])
    order = np.argsort(loads[:m], kind="stable")
    for j in order.tolist():
        if loads[j] + nu_sat > theta.tau_nu or n_blocked[j]:
            continue
        if n_users[j]:
            if sat_prbs <= 0:
                continue
            nu_sat += sat_add[j] / sat_prbs
        shut[j] = True
    new_assoc = assoc.copy()
    if shut.any():
        new_assoc[on_t & shut[np.where(on_t, assoc, 0)]] = m
    return new_assoc, shut


def evaluate_arm(snap: Snapshot, theta: ThetaConfig, zeta: float | None = None,
                 normalizer: Normalizer | None = None) -> NetworkOutcome:
    """Run all four passes for one arm on one snapshot."""
    assoc0, loads0 = init_max_rsrp(snap, theta)
    assoc1, loads1 = associate_pricing(snap, theta, loads0)
    assoc2, shut = shutdown_pass(snap, theta, assoc1, loads1)
    return serve(snap, assoc2, theta_budgets(snap, theta), shut, zeta=zeta, normalizer=normalizer)


def evaluate_benchmark(snap: Snapshot, which: str, zeta: float | None = None,
                       normalizer: Normalizer | None = None) -> NetworkOutcome:
    """Reference settings: max-RSRP association, only idle MBSs off.

    ``tn``: no satellite, terrestrial band of ``tn_benchmark_bandwidth_hz``.
    ``ntn``: total band split with ``ntn_benchmark_epsilon``.
    """
    system = snap.system
    m = snap.n_terrestrial
    if which == "tn":
        ter = int(np.floor(system.tn_benchmark_bandwidth_hz / system.prb_hz + 1e-9))
        budgets = prb_budgets(system, m, ter, 0)
    elif which == "ntn":
        split = BandwidthSplit(system.total_bandwidth_hz, system.ntn_benchmark_epsilon, system.prb_hz)
        budgets = prb_budgets(system, m, split.terrestrial_prbs, split.satellite_prbs)
    else:
        raise ValueError(f"unknown benchmark {which!r}")
    tier_ok = budgets > 0
    assoc = associate(snap.rsrp_dbm, snap.covered & tier_ok[None, :])
    return serve(snap, assoc, budgets, zeta=zeta, normalizer=normalizer)
