"""Configuration dataclasses, YAML loading and the built-in presets.

A config file is YAML with one section per subsystem::

    scenario:   {area_side_m: 8000, urban_radius_m: 750, ...}
    channel:    {carrier_hz: 2.0e9, ...}
    radio:      {total_bandwidth_hz: 4.0e7, ...}
    energy:     {p0_w: 100, psi_w: 200}
    cost:       {zeta_scale: 1.0, demand_baseline: true}
    bandit:     {grids: {...}, eta: null, ...}
    experiment: {snapshots_per_hour: 500, seeds: [0], ...}

Missing keys fall back to the dataclass defaults. Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


# Elevation buckets used by the satellite tables: 10, 20, ..., 90 degrees.
ELEVATION_BUCKETS_DEG = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0)


def diurnal_profile(low: int, high: int, trough_hour: int = 4, peak_hour: int = 20) -> list[int]:
    """Hourly UE counts following a warped cosine between a trough and a peak.

    The curve rises from ``low`` at ``trough_hour`` to ``high`` at ``peak_hour``
    and falls back over the remaining hours, each leg being a half cosine.
    """
    rise = (peak_hour - trough_hour) % 24
    fall = 24 - rise
    counts = []
    for hour in range(24):
        since_trough = (hour - trough_hour) % 24
        if since_trough <= rise:
            phase = since_trough / rise
        else:
            phase = 1.0 - (since_trough - rise) / fall
        level = 0.5 * (1.0 - math.cos(math.pi * phase))
        counts.append(int(round(low + (high - low) * level)))
    return counts


@dataclass
class ScenarioConfig:
    area_side_m: float = 8000.0
    urban_radius_m: float = 750.0
    urban_isd_m: float = 500.0
    rural_isd_m: float = 1732.0
    # rural sites closer than urban_radius_m + margin to the centre are dropped
    rural_exclusion_margin_m: float = 0.0
    # shift of the rural lattice; a non-zero shift breaks the point symmetry
    # that otherwise forces an odd total site count
    rural_lattice_offset_m: tuple[float, float] = (0.0, 0.0)
    satellite_altitude_m: float = 600e3
    # beam centre offset from the area centre
    beam_center_m: tuple[float, float] = (0.0, 0.0)
    ue_count_per_hour: list[int] = field(default_factory=lambda: diurnal_profile(50, 500))
    urban_fraction: float = 0.4
    demand_rate_param: float = 1e-6  # lambda_U, mean demand 1 / lambda_U bit/s
    indoor_prob_urban: float = 0.8
    indoor_prob_rural: float = 0.5

    def validate(self) -> None:
        if self.area_side_m <= 0:
            raise ConfigError("scenario.area_side_m must be > 0")
        if self.urban_isd_m <= 0 or self.rural_isd_m <= 0:
            raise ConfigError("inter-site distances must be > 0")
        if self.urban_isd_m >= self.rural_isd_m:
            raise ConfigError("urban ISD must be smaller than rural ISD")
        if self.urban_radius_m < 0:
            raise ConfigError("scenario.urban_radius_m must be >= 0")
        if self.satellite_altitude_m <= 0:
            raise ConfigError("satellite altitude must be > 0")
        if len(self.ue_count_per_hour) != 24:
            raise ConfigError("ue_count_per_hour needs exactly 24 entries")
        if any(int(c) < 0 for c in self.ue_count_per_hour):
            raise ConfigError("UE counts must be >= 0")
        if not 0.0 <= self.urban_fraction <= 1.0:
            raise ConfigError("urban_fraction must lie in [0, 1]")
        if self.demand_rate_param <= 0:
            raise ConfigError("demand_rate_param (lambda_U) must be > 0")
        for p in (self.indoor_prob_urban, self.indoor_prob_rural):
            if not 0.0 <= p <= 1.0:
                raise ConfigError("indoor probabilities must lie in [0, 1]")


@dataclass
class ChannelParams:
    carrier_hz: float = 2.0e9
    g_tx_terrestrial_dbi: float = 14.0
    g_tx_satellite_dbi: float = 30.0
    g_ue_dbi: float = 0.0
    bs_height_urban_m: float = 25.0
    bs_height_rural_m: float = 35.0
    ue_height_m: float = 1.5
    rural_building_height_m: float = 5.0
    rural_street_width_m: float = 20.0
    # shadow-fading std devs as (LoS, NLoS)
    sf_terrestrial_urban_db: tuple[float, float] = (4.0, 6.0)
    sf_terrestrial_rural_db: tuple[float, float] = (4.0, 8.0)
    sf_satellite_urban_db: tuple[float, float] = (4.0, 6.0)
    sf_satellite_rural_db: tuple[float, float] = (1.79, 8.93)
    # NLoS clutter loss per elevation bucket; LoS links carry none
    clutter_loss_db: tuple[float, ...] = (34.3,) * 9
    scintillation_loss_db: float = 2.2
    entry_loss_db: float = 15.0
    # O2I low-loss model: PL_tw is derived from the carrier when None
    pl_tw_db: float | None = None
    pl_in_db_per_m: float = 0.5
    indoor_distance_max_m: float = 25.0
    sigma_p_db: float = 4.4
    # satellite LoS probability (percent) per elevation bucket
    sat_los_prob_urban: tuple[float, ...] = (24.6, 38.6, 49.3, 61.3, 72.6, 80.5, 91.9, 96.8, 99.2)
    sat_los_prob_rural: tuple[float, ...] = (78.2, 86.9, 91.9, 92.9, 93.5, 94.0, 94.9, 95.2, 99.8)
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 0.0

    def validate(self) -> None:
        if self.carrier_hz <= 0:
            raise ConfigError("channel.carrier_hz must be > 0")
        sigmas = (*self.sf_terrestrial_urban_db, *self.sf_terrestrial_rural_db,
                  *self.sf_satellite_urban_db, *self.sf_satellite_rural_db, self.sigma_p_db)
        if any(s < 0 for s in sigmas):
            raise ConfigError("standard deviations must be >= 0")
        for name in ("clutter_loss_db", "sat_los_prob_urban", "sat_los_prob_rural"):
            if len(getattr(self, name)) != len(ELEVATION_BUCKETS_DEG):
                raise ConfigError(f"channel.{name} needs {len(ELEVATION_BUCKETS_DEG)} entries")

    @property
    def wall_loss_db(self) -> float:
        if self.pl_tw_db is not None:
            return self.pl_tw_db
        f_ghz = self.carrier_hz / 1e9
        glass = 2.0 + 0.2 * f_ghz
        concrete = 5.0 + 4.0 * f_ghz
        return 5.0 - 10.0 * math.log10(0.3 * 10 ** (-glass / 10) + 0.7 * 10 ** (-concrete / 10))


@dataclass
class RadioConfig:
    total_bandwidth_hz: float = 40e6
    prb_hz: float = 180e3
    subcarriers_per_prb: int = 12
    p_terrestrial_per_re_dbm: float = 17.7
    p_satellite_per_re_dbm: float = 15.8
    rsrp_min_dbm: float = -120.0
    # benchmark settings
    tn_benchmark_bandwidth_hz: float = 10e6
    ntn_benchmark_epsilon: float = 0.75

    def validate(self) -> None:
        if self.total_bandwidth_hz <= 0 or self.prb_hz <= 0:
            raise ConfigError("bandwidths must be > 0")
        if not 0.0 <= self.ntn_benchmark_epsilon <= 1.0:
            raise ConfigError("ntn_benchmark_epsilon must lie in [0, 1]")

    @property
    def re_hz(self) -> float:
        return self.prb_hz / self.subcarriers_per_prb


@dataclass
class EnergyConfig:
    p0_w: float = 100.0
    psi_w: float = 200.0
    slot_duration_s: float = 3600.0

    def validate(self) -> None:
        if self.p0_w < 0 or self.psi_w < 0:
            raise ConfigError("power components must be >= 0")
        if self.slot_duration_s <= 0:
            raise ConfigError("slot duration must be > 0")


@dataclass
class CostConfig:
    # zeta = zeta_scale / K
    zeta_scale: float = 1.0
    # subtract the demand-only SLT before normalising (per-snapshot constant)
    demand_baseline: bool = True
    calibration_snapshots: int = 3

    def validate(self) -> None:
        if self.zeta_scale < 0:
            raise ConfigError("cost.zeta_scale must be >= 0")
        if self.calibration_snapshots < 1:
            raise ConfigError("cost.calibration_snapshots must be >= 1")


DEFAULT_GRIDS = {
    "epsilon": [0.25, 0.50, 0.75, 0.85, 0.90],
    "tau_nu": [0.25, 0.50, 0.75, 0.85, 0.90],
    "tau_rsrp_dbm": [-80.0, -90.0, -100.0, -110.0, -120.0],
    "alpha": [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
}


@dataclass
class BanditConfig:
    grids: dict[str, list[float]] = field(default_factory=lambda: copy.deepcopy(DEFAULT_GRIDS))
    # None selects the horizon-based default
    eta: float | None = None
    gamma: float | None = None
    omega: float | None = None
    mu: float | None = None
    # per-hour learners (True) or one learner streamed through the day
    per_hour: bool = True
    epochs: int = 1

    def validate(self) -> None:
        for key in ("epsilon", "tau_nu", "tau_rsrp_dbm", "alpha"):
            if key not in self.grids or not self.grids[key]:
                raise ConfigError(f"bandit.grids.{key} must be a non-empty list")
        if set(self.grids) - {"epsilon", "tau_nu", "tau_rsrp_dbm", "alpha"}:
            raise ConfigError(f"unknown grid keys: {sorted(set(self.grids))}")
        if any(not 0.0 <= e <= 1.0 for e in self.grids["epsilon"]):
            raise ConfigError("epsilon grid values must lie in [0, 1]")
        if self.eta is not None and self.eta < 0:
            raise ConfigError("bandit.eta must be >= 0")
        if self.omega is not None and self.omega < 0:
            raise ConfigError("bandit.omega must be >= 0")
        if self.mu is not None and self.mu <= 0:
            raise ConfigError("bandit.mu must be > 0")
        if self.epochs < 1:
            raise ConfigError("bandit.epochs must be >= 1")


@dataclass
class ExperimentConfig:
    snapshots_per_hour: int = 7000
    seeds: list[int] = field(default_factory=lambda: [0])
    holdout_fraction: float = 0.1
    output_dir: str = "runs"
    eval_mode: str = "sample"  # or "argmax"
    sample_per_snapshot: bool = False
    oracle_snapshots_per_hour: int | None = None
    oracle_budget_s: float = 3600.0

    def validate(self) -> None:
        if self.snapshots_per_hour < 1:
            raise ConfigError("experiment.snapshots_per_hour must be >= 1")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must lie in [0, 1)")
        if self.eval_mode not in ("sample", "argmax"):
            raise ConfigError("eval_mode must be 'sample' or 'argmax'")
        if not self.seeds:
            raise ConfigError("experiment.seeds must not be empty")


@dataclass
class Config:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    radio: RadioConfig = field(default_factory=RadioConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    cost: CostConfig = field(default_factory=CostConfig)
    bandit: BanditConfig = field(default_factory=BanditConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def validate(self) -> "Config":
        for f in dataclasses.fields(self):
            getattr(self, f.name).validate()
        return self

    def to_dict(self) -> dict[str, Any]:
        return _plain(dataclasses.asdict(self))

    def replace(self, **sections: dict[str, Any]) -> "Config":
        """Copy with selected section fields overridden, e.g. ``radio={"prb_hz": 1e5}``."""
        data = self.to_dict()
        for name, overrides in sections.items():
            data[name].update(overrides)
        return from_dict(data)


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


_SECTIONS = {
    "scenario": ScenarioConfig,
    "channel": ChannelParams,
    "radio": RadioConfig,
    "energy": EnergyConfig,
    "cost": CostConfig,
    "bandit": BanditConfig,
    "experiment": ExperimentConfig,
}


def _build_section(cls: type, data: dict[str, Any], name: str) -> Any:
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        default = getattr(cls(), key)
        if isinstance(default, tuple):
            if isinstance(value, (list, tuple)):
                value = tuple(float(v) for v in value)
            elif key == "clutter_loss_db":
                # a scalar applies to every elevation bucket
                value = (float(value),) * len(ELEVATION_BUCKETS_DEG)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad [{name}] section: {exc}") from exc


def from_dict(data: dict[str, Any]) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    sections = {}
    for name, cls in _SECTIONS.items():
        section = data.get(name) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"section [{name}] must be a mapping")
        sections[name] = _build_section(cls, section, name)
    return Config(**sections).validate()


def load_config(path: str | Path) -> Config:
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return from_dict(data)


def preset(name: str) -> Config:
    """Load a bundled preset: ``desk`` or ``full``."""
    try:
        text = resources.files("ntn_bandit.presets").joinpath(f"{name}.yaml").read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"no preset named {name!r}") from exc
    return from_dict(yaml.safe_load(text) or {})
