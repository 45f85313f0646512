import itertools

import numpy as np
import pytest
from scipy import stats

from ntn_bandit import ConfigError, preset
from ntn_bandit.config import ScenarioConfig, diurnal_profile
from ntn_bandit.scenario import (TrafficProfile, UeSet, build_topology, deploy_ues, hex_lattice,
                                 sample_demands)


def brute_force_hex(isd, radius):
    """Lattice points a*(isd, 0) + b*(isd/2, isd*sqrt(3)/2) within radius."""
    pts = []
    n = int(radius / isd) + 3
    for a, b in itertools.product(range(-n, n + 1), repeat=2):
        x = a * isd + b * isd / 2
        y = b * isd * np.sqrt(3) / 2
        if np.hypot(x, y) <= radius + 1e-6:
            pts.append((x, y))
    return np.array(sorted(pts))


class TestLattice:
    def test_seven_cell_urban_disc(self):
        geo = build_topology(ScenarioConfig(area_side_m=4000, urban_radius_m=500, urban_isd_m=500,
                                            rural_isd_m=1732, rural_exclusion_margin_m=5000))
        urban = geo.mbs_xy[geo.mbs_urban]
        assert len(urban) == 7
        ref = brute_force_hex(500, 500)
        np.testing.assert_allclose(np.array(sorted(map(tuple, urban))), ref, atol=1e-9)

    @pytest.mark.parametrize("radius", [250, 900, 1600])
    def test_urban_points_match_brute_force(self, radius):
        pts = hex_lattice(500, 4000)
        inside = pts[np.hypot(pts[:, 0], pts[:, 1]) <= radius + 1e-6]
        np.testing.assert_allclose(np.array(sorted(map(tuple, inside))), brute_force_hex(500, radius),
                                   atol=1e-9)

    @pytest.mark.parametrize("isd", [500.0, 1732.0])
    def test_interior_sites_have_six_neighbours(self, isd):
        pts = hex_lattice(isd, 6 * isd)
        d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
        interior = np.max(np.abs(pts), axis=1) < 6 * isd - 1.5 * isd
        near = (np.abs(d - isd) <= 1e-6).sum(axis=1)
        assert interior.sum() > 10
        assert np.all(near[interior] == 6)
        # nothing closer than one ISD
        assert np.all(d[~np.eye(len(pts), dtype=bool)] >= isd - 1e-6)

    def test_degenerate_urban_disc_gives_rural_only(self):
        geo = build_topology(ScenarioConfig(urban_radius_m=0))
        assert geo.n_terrestrial > 0
        assert not geo.mbs_urban.any()

    def test_all_sites_inside_area(self, desk_cfg):
        geo = build_topology(desk_cfg.scenario)
        assert geo.contains(geo.mbs_xy).all()

    def test_desk_site_count_in_range(self, desk_cfg):
        geo = build_topology(desk_cfg.scenario)
        assert 19 <= geo.n_terrestrial <= 37
        assert geo.mbs_urban.sum() == 7

    def test_full_scale_site_count(self):
        geo = build_topology(preset("full").scenario)
        assert geo.n_terrestrial == 1776
        assert geo.contains(geo.mbs_xy).all()
        assert 2400 <= geo.area_km2 <= 2600

    def test_area_too_small(self):
        with pytest.raises(ConfigError):
            build_topology(ScenarioConfig(area_side_m=1.0, urban_radius_m=0, rural_lattice_offset_m=(800, 800)))

    def test_isd_order_enforced(self):
        with pytest.raises(ConfigError):
            build_topology(ScenarioConfig(urban_isd_m=2000, rural_isd_m=1000))


class TestUeDeployment:
    def profile(self, count=1000, frac=0.4):
        return TrafficProfile(tuple([count] * 24), frac, 1e-6)

    def test_zero_count_is_empty(self, desk_cfg):
        geo = build_topology(desk_cfg.scenario)
        ues = deploy_ues(geo, self.profile(0), 3, 0)
        assert len(ues) == 0

    def test_urban_share(self, desk_cfg):
        geo = build_topology(desk_cfg.scenario)
        shares = [deploy_ues(geo, self.profile(), 12, s).urban.mean() for s in range(20)]
        assert all(abs(s - 0.4) <= 0.05 for s in shares)

    def test_urban_split_chi_square(self, desk_cfg):
        geo = build_topology(desk_cfg.scenario)
        n_urban = sum(int(deploy_ues(geo, self.profile(500), 7, s).urban.sum()) for s in range(40))
        total = 500 * 40
        chi2 = stats.chisquare([n_urban, total - n_urban], [0.4 * total, 0.6 * total])
        assert chi2.pvalue > 0.01

    def test_deterministic(self, desk_cfg):
        geo = build_topology(desk_cfg.scenario)
        a = deploy_ues(geo, self.profile(50), 5, [1, 2, 3])
        b = deploy_ues(geo, self.profile(50), 5, [1, 2, 3])
        np.testing.assert_array_equal(a.xy, b.xy)
        np.testing.assert_array_equal(a.indoor, b.indoor)

    def test_positions_respect_regions(self, desk_cfg):
        geo = build_topology(desk_cfg.scenario)
        ues = deploy_ues(geo, self.profile(2000), 20, 9)
        r = np.hypot(ues.xy[:, 0], ues.xy[:, 1])
        assert geo.contains(ues.xy).all()
        assert np.all(r[ues.urban] <= geo.urban_radius_m)
        assert np.all(r[~ues.urban] > geo.urban_radius_m)

    def test_bad_hour(self, desk_cfg):
        with pytest.raises(ValueError):
            deploy_ues(build_topology(desk_cfg.scenario), self.profile(), 24, 0)

    def test_ue_view(self, desk_cfg):
        ues = deploy_ues(build_topology(desk_cfg.scenario), self.profile(3), 0, 1)
        ue = ues[-1]
        assert ue.id == 2 and ue.region in ("urban", "rural")
        with pytest.raises(IndexError):
            ues[3]


class TestDemands:
    def test_mean(self):
        ues = UeSet(np.zeros((100_000, 2)), np.zeros(100_000, bool), np.zeros(100_000, bool), np.zeros(100_000))
        d = sample_demands(ues, 1e-6, 4).demand_bps
        assert abs(d.mean() - 1e6) <= 0.02 * 1e6
        assert np.all(d >= 0)

    def test_empty_noop(self):
        empty = UeSet.empty()
        assert sample_demands(empty, 1e-6, 0) is empty

    def test_deterministic(self):
        ues = UeSet(np.zeros((10, 2)), np.zeros(10, bool), np.zeros(10, bool), np.zeros(10))
        np.testing.assert_array_equal(sample_demands(ues, 1e-6, 7).demand_bps,
                                      sample_demands(ues, 1e-6, 7).demand_bps)

    def test_rate_must_be_positive(self):
        with pytest.raises(ConfigError):
            sample_demands(UeSet.empty(), 0.0, 0)


class TestProfile:
    def test_diurnal_shape(self):
        p = diurnal_profile(50, 500)
        assert len(p) == 24
        assert min(p) == p[4] == 50
        assert max(p) == p[20] == 500

    def test_hours_by_traffic(self):
        prof = TrafficProfile(tuple(diurnal_profile(50, 500)), 0.4, 1e-6)
        order = prof.hours_by_traffic()
        assert order[0] == 4 and order[-1] == 20
        assert sorted(order) == list(range(24))

    def test_profile_validation(self):
        with pytest.raises(ConfigError):
            TrafficProfile((1,) * 23, 0.4, 1e-6)
        with pytest.raises(ConfigError):
            TrafficProfile((1,) * 24, 1.4, 1e-6)
