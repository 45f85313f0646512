"""Deployment geometry, diurnal traffic and UE placement.

Coordinates are metres in a flat plane centred on the study area, which is
the square ``[-side/2, side/2]^2``. The urban region is a disc of radius
``urban_radius_m`` around the centre; the rest of the square is rural.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass, replace

import numpy as np

from .config import ConfigError, ScenarioConfig

URBAN = "urban"
RURAL = "rural"

_EDGE_TOL_M = 1e-6


@dataclass(frozen=True)
class Satellite:
    altitude_m: float
    beam_center: tuple[float, float]


@dataclass(frozen=True, eq=False)
class DeploymentGeometry:
    area_side_m: float
    urban_radius_m: float
    urban_isd_m: float
    rural_isd_m: float
    mbs_xy: np.ndarray  # (M, 2)
    mbs_urban: np.ndarray  # (M,) bool
    satellite: Satellite

    @property
    def area_km2(self) -> float:
        return self.area_side_m**2 / 1e6

    @property
    def n_terrestrial(self) -> int:
        return len(self.mbs_xy)

    @property
    def mbs_sites(self) -> list[tuple[tuple[float, float], str]]:
        return [((float(x), float(y)), URBAN if u else RURAL)
                for (x, y), u in zip(self.mbs_xy, self.mbs_urban)]

    def contains(self, xy: np.ndarray) -> np.ndarray:
        half = self.area_side_m / 2 + _EDGE_TOL_M
        xy = np.atleast_2d(xy)
        return (np.abs(xy[:, 0]) <= half) & (np.abs(xy[:, 1]) <= half)


@dataclass(frozen=True)
class Ue:
    id: int
    position: tuple[float, float]
    indoor: bool
    region: str
    demand_bps: float


@dataclass(frozen=True, eq=False)
class UeSet(Sequence):
    """Struct-of-arrays view of a UE population; indexing yields :class:`Ue`."""

    xy: np.ndarray  # (K, 2)
    urban: np.ndarray  # (K,) bool
    indoor: np.ndarray  # (K,) bool
    demand_bps: np.ndarray  # (K,)

    def __len__(self) -> int:
        return len(self.xy)

    def __getitem__(self, i: int) -> Ue:  # type: ignore[override]
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i = i % len(self)
        return Ue(
            id=i,
            position=(float(self.xy[i, 0]), float(self.xy[i, 1])),
            indoor=bool(self.indoor[i]),
            region=URBAN if self.urban[i] else RURAL,
            demand_bps=float(self.demand_bps[i]),
        )

    def __iter__(self) -> Iterator[Ue]:
        return (self[i] for i in range(len(self)))

    @classmethod
    def empty(cls) -> "UeSet":
        return cls(np.zeros((0, 2)), np.zeros(0, bool), np.zeros(0, bool), np.zeros(0))


@dataclass(frozen=True)
class TrafficProfile:
    ue_count_per_hour: tuple[int, ...]
    urban_fraction: float
    demand_rate_param: float
    indoor_prob_urban: float = 0.8
    indoor_prob_rural: float = 0.5

    def __post_init__(self):
        if len(self.ue_count_per_hour) != 24:
            raise ConfigError("ue_count_per_hour needs 24 entries")
        if any(c < 0 for c in self.ue_count_per_hour):
            raise ConfigError("UE counts must be >= 0")
        if not 0.0 <= self.urban_fraction <= 1.0:
            raise ConfigError("urban_fraction must lie in [0, 1]")

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "TrafficProfile":
        return cls(
            ue_count_per_hour=tuple(int(c) for c in cfg.ue_count_per_hour),
            urban_fraction=cfg.urban_fraction,
            demand_rate_param=cfg.demand_rate_param,
            indoor_prob_urban=cfg.indoor_prob_urban,
            indoor_prob_rural=cfg.indoor_prob_rural,
        )

    def hours_by_traffic(self) -> list[int]:
        """Hours sorted from lowest to highest UE count (stable on ties)."""
        return sorted(range(24), key=lambda h: (self.ue_count_per_hour[h], h))


def hex_lattice(isd_m: float, extent_m: float) -> np.ndarray:
    """All points of a hexagonal lattice (spacing ``isd_m``, one point at the
    origin) lying in the square ``[-extent, extent]^2``."""
    row_h = isd_m * np.sqrt(3.0) / 2.0
    n_rows = int(np.floor(extent_m / row_h + 1e-9))
    n_cols = int(np.ceil(extent_m / isd_m)) + 1
    pts = []
    for r in range(-n_rows, n_rows + 1):
        offset = 0.5 * isd_m if r % 2 else 0.0
        xs = offset + isd_m * np.arange(-n_cols, n_cols + 1)
        xs = xs[np.abs(xs) <= extent_m + _EDGE_TOL_M]
        pts.extend((x, r * row_h) for x in xs)
    return np.array(pts, dtype=float).reshape(-1, 2)


def build_topology(cfg: ScenarioConfig) -> DeploymentGeometry:
    """Urban lattice inside the urban disc, rural lattice over the rest of the
    square, and one satellite beam covering the whole area."""
    cfg.validate()
    half = cfg.area_side_m / 2.0
    urban_xy = np.zeros((0, 2))
    if cfg.urban_radius_m > 0:
        pts = hex_lattice(cfg.urban_isd_m, half)
        urban_xy = pts[np.hypot(pts[:, 0], pts[:, 1]) <= cfg.urban_radius_m + _EDGE_TOL_M]
    off = np.asarray(cfg.rural_lattice_offset_m, dtype=float)
    rural = hex_lattice(cfg.rural_isd_m, half + np.abs(off).max()) + off
    rural = rural[np.all(np.abs(rural) <= half + _EDGE_TOL_M, axis=1)]
    if cfg.urban_radius_m > 0:
        keep = np.hypot(rural[:, 0], rural[:, 1]) > cfg.urban_radius_m + cfg.rural_exclusion_margin_m
        rural = rural[keep]
    mbs_xy = np.vstack([urban_xy, rural])
    if len(mbs_xy) == 0:
        raise ConfigError("study area is too small to hold a single site")
    mbs_urban = np.r_[np.ones(len(urban_xy), bool), np.zeros(len(rural), bool)]
    return DeploymentGeometry(
        area_side_m=cfg.area_side_m,
        urban_radius_m=cfg.urban_radius_m,
        urban_isd_m=cfg.urban_isd_m,
        rural_isd_m=cfg.rural_isd_m,
        mbs_xy=mbs_xy,
        mbs_urban=mbs_urban,
        satellite=Satellite(cfg.satellite_altitude_m, tuple(cfg.beam_center_m)),
    )


def _uniform_disc(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def _uniform_rural(rng: np.random.Generator, n: int, half: float, urban_radius: float) -> np.ndarray:
    out = np.zeros((0, 2))
    while len(out) < n:
        batch = rng.uniform(-half, half, size=(2 * (n - len(out)) + 8, 2))
        batch = batch[np.hypot(batch[:, 0], batch[:, 1]) > urban_radius]
        out = np.vstack([out, batch])
    return out[:n]


def deploy_ues(geometry: DeploymentGeometry, profile: TrafficProfile, hour: int,
               seed: int | Sequence[int] | np.random.Generator) -> UeSet:
    """Place ``ue_count_per_hour[hour]`` UEs; demands are left at zero.

    Each UE is urban with probability ``urban_fraction``. When the urban disc
    is degenerate every UE is rural.
    """
    if not 0 <= hour <= 23:
        raise ValueError(f"hour must be in [0, 23], got {hour}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    k = int(profile.ue_count_per_hour[hour])
    if k == 0:
        return UeSet.empty()
    half = geometry.area_side_m / 2.0
    if geometry.urban_radius_m > 0:
        urban = rng.random(k) < profile.urban_fraction
    else:
        urban = np.zeros(k, bool)
    xy = np.empty((k, 2))
    n_urban = int(urban.sum())
    xy[urban] = _uniform_disc(rng, n_urban, geometry.urban_radius_m)
    xy[~urban] = _uniform_rural(rng, k - n_urban, half, geometry.urban_radius_m)
    p_in = np.where(urban, profile.indoor_prob_urban, profile.indoor_prob_rural)
    indoor = rng.random(k) < p_in
    return UeSet(xy=xy, urban=urban, indoor=indoor, demand_bps=np.zeros(k))


def sample_demands(ues: UeSet, demand_rate_param: float,
                   seed: int | Sequence[int] | np.random.Generator) -> UeSet:
    """Draw i.i.d. exponential demands with mean ``1 / demand_rate_param``."""
    if demand_rate_param <= 0:
        raise ConfigError("demand_rate_param must be > 0")
    if len(ues) == 0:
        return ues
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    demand = rng.exponential(1.0 / demand_rate_param, size=len(ues))
    return replace(ues, demand_bps=demand)
