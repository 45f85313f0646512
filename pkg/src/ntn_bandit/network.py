"""Frozen network snapshots and the derived system constants.

A :class:`Snapshot` is one realisation of UE positions, demands and link
gains for a given hour. It is a pure function of ``(config, hour, index,
seed)``: each snapshot draws from three independent streams (placement,
demands, fading) keyed by those integers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channel import dbm_to_watt, link_gains, noise_per_re_w
from .config import Config
from .energy import PowerModel
from .scenario import DeploymentGeometry, TrafficProfile, UeSet, build_topology, deploy_ues, sample_demands

PLACEMENT, DEMAND, FADING = 0, 1, 2


@dataclass(frozen=True)
class SystemParams:
    total_bandwidth_hz: float
    prb_hz: float
    subcarriers_per_prb: int
    p_terrestrial_w: float
    p_satellite_w: float
    noise_w: float
    rsrp_min_dbm: float
    power: PowerModel
    slot_duration_s: float
    zeta_scale: float
    tn_benchmark_bandwidth_hz: float
    ntn_benchmark_epsilon: float

    @classmethod
    def from_config(cls, cfg: Config) -> "SystemParams":
        r = cfg.radio
        p_t = float(dbm_to_watt(r.p_terrestrial_per_re_dbm))
        return cls(
            total_bandwidth_hz=r.total_bandwidth_hz,
            prb_hz=r.prb_hz,
            subcarriers_per_prb=r.subcarriers_per_prb,
            p_terrestrial_w=p_t,
            p_satellite_w=float(dbm_to_watt(r.p_satellite_per_re_dbm)),
            noise_w=noise_per_re_w(cfg.channel, r.re_hz),
            rsrp_min_dbm=r.rsrp_min_dbm,
            power=PowerModel(cfg.energy.p0_w, cfg.energy.psi_w, p_t),
            slot_duration_s=cfg.energy.slot_duration_s,
            zeta_scale=cfg.cost.zeta_scale,
            tn_benchmark_bandwidth_hz=r.tn_benchmark_bandwidth_hz,
            ntn_benchmark_epsilon=r.ntn_benchmark_epsilon,
        )


@dataclass(frozen=True, eq=False)
class Snapshot:
    hour: int
    index: int
    seed: int
    ues: UeSet
    gain: np.ndarray  # (K, M + 1), satellite last
    los: np.ndarray  # (K, M + 1)
    system: SystemParams
    # per-snapshot memo of arm-independent intermediates
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    @property
    def n_terrestrial(self) -> int:
        return self.gain.shape[1] - 1

    @cached_property
    def tx_power_w(self) -> np.ndarray:
        m = self.n_terrestrial
        return np.r_[np.full(m, self.system.p_terrestrial_w), self.system.p_satellite_w]

    @cached_property
    def rx_w(self) -> np.ndarray:
        """Received power per RE for every link, W."""
        return self.gain * self.tx_power_w[None, :]

    @cached_property
    def rsrp_dbm(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.rx_w * 1000.0)

    @cached_property
    def covered(self) -> np.ndarray:
        return self.rsrp_dbm >= self.system.rsrp_min_dbm

    @cached_property
    def log_demand_sum(self) -> float:
        return float(np.sum(np.log(np.maximum(self.ues.demand_bps, 1.0))))


class SnapshotFactory:
    """Builds snapshots for one config; holds the topology and traffic model."""

    def __init__(self, cfg: Config, geometry: DeploymentGeometry | None = None):
        self.cfg = cfg
        self.geometry = geometry or build_topology(cfg.scenario)
        self.profile = TrafficProfile.from_config(cfg.scenario)
        self.system = SystemParams.from_config(cfg)

    def ues(self, hour: int, index: int, seed: int) -> UeSet:
        ues = deploy_ues(self.geometry, self.profile, hour, [seed, hour, index, PLACEMENT])
        return sample_demands(ues, self.profile.demand_rate_param, [seed, hour, index, DEMAND])

    def from_ues(self, hour: int, index: int, seed: int, ues: UeSet) -> Snapshot:
        rng = np.random.default_rng([seed, hour, index, FADING])
        gain, los = link_gains(self.geometry, ues, self.cfg.channel, rng)
        return Snapshot(hour, index, seed, ues, gain, los, self.system)

    def make(self, hour: int, index: int, seed: int) -> Snapshot:
        return self.from_ues(hour, index, seed, self.ues(hour, index, seed))

    def hour_snapshots(self, hour: int, seed: int, count: int, start: int = 0) -> list[Snapshot]:
        return [self.make(hour, i, seed) for i in range(start, start + count)]
