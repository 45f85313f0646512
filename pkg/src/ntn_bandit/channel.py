"""Large-scale link gains, RSRP and SINR.

Every term of a link budget is expressed as a *gain* in dB, so losses enter
with a negative sign and the budget is a plain sum mapped to linear scale.
Terrestrial links use the UMa (urban sites) or RMa (rural sites) closed-form
path loss; satellite links use free-space loss over the slant range plus
clutter, scintillation and building-entry terms.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .config import ELEVATION_BUCKETS_DEG, ChannelParams
from .scenario import RURAL, URBAN, DeploymentGeometry, Ue, UeSet

SPEED_OF_LIGHT = 299_792_458.0
MIN_DISTANCE_M = 10.0


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def linear_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watt(x):
    return db_to_linear(x) / 1000.0


def noise_per_re_w(params: ChannelParams, re_hz: float) -> float:
    return float(dbm_to_watt(params.noise_density_dbm_hz + params.noise_figure_db
                             + 10.0 * np.log10(re_hz)))


@dataclass(frozen=True)
class LinkState:
    gain_linear: float
    los: bool
    rsrp_dbm: float


# --- LoS probability -------------------------------------------------------

def uma_los_probability(d2d, ue_height_m: float = 1.5):
    d = np.asarray(d2d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = 18.0 / d + np.exp(-d / 63.0) * (1.0 - 18.0 / d)
        c = 0.0 if ue_height_m <= 13.0 else ((ue_height_m - 13.0) / 10.0) ** 1.5
        p = base * (1.0 + c * 1.25 * (d / 100.0) ** 3 * np.exp(-d / 150.0))
    return np.where(d <= 18.0, 1.0, np.clip(p, 0.0, 1.0))


def rma_los_probability(d2d):
    d = np.asarray(d2d, dtype=float)
    return np.where(d <= 10.0, 1.0, np.exp(-(d - 10.0) / 1000.0))


def satellite_los_probability(elevation_deg, table_percent: Sequence[float]):
    """Linear interpolation of a 10-degree bucket table; clamped below 10 deg."""
    return np.interp(elevation_deg, ELEVATION_BUCKETS_DEG, np.asarray(table_percent) / 100.0)


def los_probability(distance_2d_m, tier: str, elevation_deg=90.0, region: str = URBAN,
                    params: ChannelParams | None = None):
    """LoS probability for a terrestrial (``tier`` urban/rural) or a
    ``"satellite"`` link. Satellite links depend on elevation and UE region."""
    params = params or ChannelParams()
    if tier == URBAN:
        return uma_los_probability(distance_2d_m, params.ue_height_m)
    if tier == RURAL:
        return rma_los_probability(distance_2d_m)
    if tier == "satellite":
        table = params.sat_los_prob_urban if region == URBAN else params.sat_los_prob_rural
        return satellite_los_probability(elevation_deg, table)
    raise ValueError(f"unknown tier {tier!r}")


# --- basic path loss (positive dB) -----------------------------------------

def uma_path_loss_db(d2d, los, params: ChannelParams):
    fc = params.carrier_hz / 1e9
    h_bs, h_ut = params.bs_height_urban_m, params.ue_height_m
    d2 = np.maximum(np.asarray(d2d, dtype=float), MIN_DISTANCE_M)
    d3 = np.sqrt(d2**2 + (h_bs - h_ut) ** 2)
    d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * params.carrier_hz / SPEED_OF_LIGHT
    pl1 = 28.0 + 22.0 * np.log10(d3) + 20.0 * np.log10(fc)
    pl2 = (28.0 + 40.0 * np.log10(d3) + 20.0 * np.log10(fc)
           - 9.0 * np.log10(d_bp**2 + (h_bs - h_ut) ** 2))
    pl_los = np.where(d2 <= d_bp, pl1, pl2)
    pl_nlos = 13.54 + 39.08 * np.log10(d3) + 20.0 * np.log10(fc) - 0.6 * (h_ut - 1.5)
    return np.where(los, pl_los, np.maximum(pl_los, pl_nlos))


def rma_path_loss_db(d2d, los, params: ChannelParams):
    fc = params.carrier_hz / 1e9
    h_bs, h_ut = params.bs_height_rural_m, params.ue_height_m
    h, w = params.rural_building_height_m, params.rural_street_width_m
    d2 = np.maximum(np.asarray(d2d, dtype=float), MIN_DISTANCE_M)
    d3 = np.sqrt(d2**2 + (h_bs - h_ut) ** 2)
    d_bp = 2.0 * np.pi * h_bs * h_ut * params.carrier_hz / SPEED_OF_LIGHT

    def pl1(d):
        return (20.0 * np.log10(40.0 * np.pi * d * fc / 3.0)
                + min(0.03 * h**1.72, 10.0) * np.log10(d)
                - min(0.044 * h**1.72, 14.77)
                + 0.002 * np.log10(h) * d)

    pl_los = np.where(d2 <= d_bp, pl1(d3), pl1(d_bp) + 40.0 * np.log10(d3 / d_bp))
    pl_nlos = (161.04 - 7.1 * np.log10(w) + 7.5 * np.log10(h)
               - (24.37 - 3.7 * (h / h_bs) ** 2) * np.log10(h_bs)
               + (43.42 - 3.1 * np.log10(h_bs)) * (np.log10(d3) - 3.0)
               + 20.0 * np.log10(fc)
               - (3.2 * np.log10(11.75 * h_ut) ** 2 - 4.97))
    return np.where(los, pl_los, np.maximum(pl_los, pl_nlos))


def free_space_path_loss_db(distance_m, carrier_hz: float):
    d = np.asarray(distance_m, dtype=float)
    return 20.0 * np.log10(4.0 * np.pi * d * carrier_hz / SPEED_OF_LIGHT)


def satellite_geometry(ue_xy, satellite) -> tuple[np.ndarray, np.ndarray]:
    """Slant range (m) and elevation (deg) for a satellite directly above its
    beam centre."""
    xy = np.atleast_2d(np.asarray(ue_xy, dtype=float))
    r = np.hypot(xy[:, 0] - satellite.beam_center[0], xy[:, 1] - satellite.beam_center[1])
    h = satellite.altitude_m
    return np.sqrt(h**2 + r**2), np.degrees(np.arctan2(h, r))


def elevation_bucket(elevation_deg) -> np.ndarray:
    idx = np.rint(np.asarray(elevation_deg, dtype=float) / 10.0).astype(int) - 1
    return np.clip(idx, 0, len(ELEVATION_BUCKETS_DEG) - 1)


# --- link budget assembly --------------------------------------------------

def terrestrial_gain_db(g_tx, g_ue, pl_b, sf, pl_tw=0.0, pl_in=0.0, pen_noise=0.0):
    """Terrestrial budget: every argument is a dB gain (losses negative)."""
    return g_tx + g_ue + pl_b + sf + pl_tw + pl_in + pen_noise


def satellite_gain_db(g_tx, g_ue, pl_b, sf, cl=0.0, pl_s=0.0, pl_e=0.0):
    """Satellite budget: every argument is a dB gain (losses negative)."""
    return g_tx + g_ue + pl_b + sf + cl + pl_s + pl_e


def _terrestrial_terms(d2d, urban_site, los, params: ChannelParams):
    pl = np.where(urban_site, uma_path_loss_db(d2d, los, params), rma_path_loss_db(d2d, los, params))
    sigma_u = np.where(los, *params.sf_terrestrial_urban_db)
    sigma_r = np.where(los, *params.sf_terrestrial_rural_db)
    return pl, np.where(urban_site, sigma_u, sigma_r)


def _terrestrial_los_prob(d2d, urban_site, params: ChannelParams):
    return np.where(urban_site, uma_los_probability(d2d, params.ue_height_m), rma_los_probability(d2d))


def _satellite_terms(elevation, urban_ue, los, params: ChannelParams):
    sigma_u = np.where(los, *params.sf_satellite_urban_db)
    sigma_r = np.where(los, *params.sf_satellite_rural_db)
    cl = np.where(los, 0.0, np.asarray(params.clutter_loss_db)[elevation_bucket(elevation)])
    return np.where(urban_ue, sigma_u, sigma_r), cl


def rsrp_dbm(gain_linear, p_per_re_w):
    """Received power per RE in dBm; zero power maps to ``-inf``."""
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(np.asarray(gain_linear, dtype=float) * np.asarray(p_per_re_w, dtype=float) * 1000.0)
    return float(out) if np.ndim(out) == 0 else out


def terrestrial_gain(mbs_xy, mbs_urban: bool, ue: Ue, params: ChannelParams,
                     seed, p_per_re_dbm: float = 17.7) -> LinkState:
    """Draw one terrestrial link (LoS state, shadowing, O2I penetration)."""
    rng = np.random.default_rng(seed)
    d2d = float(np.hypot(ue.position[0] - mbs_xy[0], ue.position[1] - mbs_xy[1]))
    los = bool(rng.random() < _terrestrial_los_prob(d2d, mbs_urban, params))
    pl, sigma = _terrestrial_terms(d2d, mbs_urban, los, params)
    sf = rng.normal(0.0, float(sigma))
    pl_tw = pl_in = pen = 0.0
    if ue.indoor:
        pl_tw = -params.wall_loss_db
        pl_in = -params.pl_in_db_per_m * rng.uniform(0.0, params.indoor_distance_max_m)
        pen = rng.normal(0.0, params.sigma_p_db)
    g_db = terrestrial_gain_db(params.g_tx_terrestrial_dbi, params.g_ue_dbi, -float(pl), sf, pl_tw, pl_in, pen)
    beta = float(db_to_linear(g_db))
    return LinkState(beta, los, rsrp_dbm(beta, dbm_to_watt(p_per_re_dbm)))


def satellite_gain(satellite, ue: Ue, params: ChannelParams, seed,
                   p_per_re_dbm: float = 15.8) -> LinkState:
    """Draw one satellite link (LoS state, shadowing, clutter when NLoS)."""
    rng = np.random.default_rng(seed)
    slant, elev = satellite_geometry(ue.position, satellite)
    slant, elev = float(slant[0]), float(elev[0])
    los = bool(rng.random() < los_probability(0.0, "satellite", elev, ue.region, params))
    sigma, cl = _satellite_terms(elev, ue.region == URBAN, los, params)
    sf = rng.normal(0.0, float(sigma))
    pl_e = -params.entry_loss_db if ue.indoor else 0.0
    g_db = satellite_gain_db(params.g_tx_satellite_dbi, params.g_ue_dbi,
                             -float(free_space_path_loss_db(slant, params.carrier_hz)),
                             sf, -float(cl), -params.scintillation_loss_db, pl_e)
    beta = float(db_to_linear(g_db))
    return LinkState(beta, los, rsrp_dbm(beta, dbm_to_watt(p_per_re_dbm)))


def link_gains(geometry: DeploymentGeometry, ues: UeSet, params: ChannelParams,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Linear gains and LoS flags for every (UE, MBS) pair.

    Returns arrays of shape ``(K, M + 1)``; the last column is the satellite.
    Shadowing and penetration draws are made once here and frozen with the
    snapshot.
    """
    k, m = len(ues), geometry.n_terrestrial
    if k == 0:
        return np.zeros((0, m + 1)), np.zeros((0, m + 1), bool)
    diff = ues.xy[:, None, :] - geometry.mbs_xy[None, :, :]
    d2d = np.hypot(diff[..., 0], diff[..., 1])
    urban_site = np.broadcast_to(geometry.mbs_urban[None, :], d2d.shape)

    los_t = rng.random((k, m)) < _terrestrial_los_prob(d2d, urban_site, params)
    pl, sigma = _terrestrial_terms(d2d, urban_site, los_t, params)
    sf = rng.standard_normal((k, m)) * sigma
    indoor = ues.indoor[:, None]
    pl_in = -params.pl_in_db_per_m * rng.uniform(0.0, params.indoor_distance_max_m, size=k)
    pen = rng.standard_normal((k, m)) * params.sigma_p_db
    g_t = terrestrial_gain_db(params.g_tx_terrestrial_dbi, params.g_ue_dbi, -pl, sf,
                              np.where(indoor, -params.wall_loss_db, 0.0),
                              np.where(indoor, pl_in[:, None], 0.0),
                              np.where(indoor, pen, 0.0))

    slant, elev = satellite_geometry(ues.xy, geometry.satellite)
    p_los = np.where(ues.urban,
                     satellite_los_probability(elev, params.sat_los_prob_urban),
                     satellite_los_probability(elev, params.sat_los_prob_rural))
    los_s = rng.random(k) < p_los
    sigma_s, cl = _satellite_terms(elev, ues.urban, los_s, params)
    sf_s = rng.standard_normal(k) * sigma_s
    g_s = satellite_gain_db(params.g_tx_satellite_dbi, params.g_ue_dbi,
                            -free_space_path_loss_db(slant, params.carrier_hz), sf_s, -cl,
                            -params.scintillation_loss_db,
                            np.where(ues.indoor, -params.entry_loss_db, 0.0))
    gain = db_to_linear(np.column_stack([g_t, g_s]))
    return gain, np.column_stack([los_t, los_s])


def sinr(serving_gain: float, interfering_gains: Sequence[float], p_serving: float,
         p_interferers: Sequence[float] | float, noise: float) -> float:
    """Large-scale SINR of one link against co-tier interferers."""
    g = np.asarray(interfering_gains, dtype=float)
    p = np.broadcast_to(np.asarray(p_interferers, dtype=float), g.shape)
    return float(serving_gain * p_serving / (float(np.sum(g * p)) + noise))
