import csv
import json
import logging

import numpy as np
import pytest
import yaml
from scipy import stats

from ntn_bandit import ConfigError, preset
from ntn_bandit.bandit import ArmSpace, Hyperparameters, PolicyState
from ntn_bandit.harness.cli import main, merge_metrics, parse_hours
from ntn_bandit.harness.corpus import SnapshotStore, StoreError, config_digest, generate_corpus
from ntn_bandit.harness.experiment import (Checkpoint, CostNormalizer, GeneratedSource, calibrate, evaluate,
                                           oracle_sweep, policy_matrix, regret_report, run_benchmark,
                                           split_holdout, train, training_schedule, uniform_policy)
from ntn_bandit.harness.metrics import (CSV_COLUMNS, HourlyMetrics, aggregate, read_metrics_csv,
                                        write_metrics_csv)
from ntn_bandit.harness.pipeline import run_seed
from ntn_bandit.harness.plotting import plot_daily_profiles, plot_regret
from ntn_bandit.heuristic import evaluate_arm

TINY_UES = [3] * 12 + [6] * 11 + [0]


@pytest.fixture(scope="module")
def tiny():
    return preset("desk").replace(
        scenario={"ue_count_per_hour": TINY_UES},
        bandit={"grids": {"epsilon": [0.5, 0.75], "tau_nu": [0.5], "tau_rsrp_dbm": [-110], "alpha": [0, 1]},
                "epochs": 1, "eta": 0.1, "gamma": 0.01},
        experiment={"snapshots_per_hour": 6, "seeds": [0, 1]},
    )


@pytest.fixture(scope="module")
def source(tiny):
    return GeneratedSource(tiny)


@pytest.fixture(scope="module")
def tiny_yaml(tiny, tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.yaml"
    path.write_text(yaml.safe_dump(tiny.to_dict()))
    return path


class FailingSource:
    """Simulates an interrupted run by failing on one hour."""

    def __init__(self, inner, bad_hour):
        self.inner, self.bad_hour = inner, bad_hour

    def load_hour(self, hour, seed):
        if hour == self.bad_hour:
            raise OSError("disk went away")
        return self.inner.load_hour(hour, seed)


class TestCorpus:
    def test_digest_ignores_learning_sections(self, tiny):
        assert config_digest(tiny) == config_digest(tiny.replace(bandit={"eta": 0.7}, experiment={"seeds": [5]}))
        assert config_digest(tiny) != config_digest(tiny.replace(scenario={"urban_fraction": 0.5}))

    def test_deterministic_digest(self, tiny, tmp_path):
        a = generate_corpus(tiny, tmp_path / "a", [0], [0, 5])
        b = generate_corpus(tiny, tmp_path / "b", [0], [0, 5])
        assert a["digest"] == b["digest"]
        assert a["digest"] != generate_corpus(tiny, tmp_path / "c", [1], [0, 5])["digest"]

    def test_one_snapshot_per_hour(self, tiny, tmp_path):
        cfg = tiny.replace(experiment={"snapshots_per_hour": 1})
        index = generate_corpus(cfg, tmp_path, [0])
        assert len(index["files"]) == 24
        assert all(v["count"] == 1 for v in index["files"].values())

    def test_round_trip_matches_generation(self, tiny, source, tmp_path):
        generate_corpus(tiny, tmp_path, [1], [7, 23])
        store = SnapshotStore(tmp_path, tiny)
        assert store.seeds == [1] and store.hours == [7, 23]
        for h in (7, 23):
            for s, ref in zip(store.load_hour(h, 1), source.load_hour(h, 1)):
                np.testing.assert_array_equal(s.gain, ref.gain)
                np.testing.assert_array_equal(s.ues.demand_bps, ref.ues.demand_bps)
                np.testing.assert_array_equal(s.ues.indoor, ref.ues.indoor)

    def test_csv_export(self, tiny, source, tmp_path):
        generate_corpus(tiny, tmp_path, [0], [12])
        path = SnapshotStore(tmp_path, tiny).export_csv(12, 0)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        snaps = source.load_hour(12, 0)
        assert len(rows) == sum(s.n_ues for s in snaps)
        first = snaps[0].ues
        assert float(rows[0]["demand_bps"]) == first.demand_bps[0]
        assert float(rows[0]["x_m"]) == first.xy[0, 0]

    def test_missing_index(self, tiny, tmp_path):
        with pytest.raises(StoreError):
            SnapshotStore(tmp_path, tiny)

    def test_missing_hour(self, tiny, tmp_path):
        generate_corpus(tiny, tmp_path, [0], [0])
        with pytest.raises(StoreError):
            SnapshotStore(tmp_path, tiny).load_hour(3, 0)

    def test_schema_mismatch(self, tiny, tmp_path):
        generate_corpus(tiny, tmp_path, [0], [0])
        index = json.loads((tmp_path / "index.json").read_text())
        index["schema_version"] = 99
        (tmp_path / "index.json").write_text(json.dumps(index))
        with pytest.raises(StoreError):
            SnapshotStore(tmp_path, tiny)

    def test_config_mismatch_warns(self, tiny, tmp_path, caplog):
        generate_corpus(tiny, tmp_path, [0], [0])
        with caplog.at_level(logging.WARNING):
            SnapshotStore(tmp_path, tiny.replace(scenario={"urban_fraction": 0.6}))
        assert "different scenario config" in caplog.text


class TestSplitAndNormaliser:
    def test_holdout(self):
        train_s, test_s = split_holdout(list(range(10)), 0.1)
        assert train_s == list(range(9)) and test_s == [9]

    def test_holdout_keeps_both_sides(self):
        assert split_holdout([1, 2], 0.01) == ([1], [2])
        assert split_holdout([1, 2, 3], 0.99) == ([1], [2, 3])
        assert split_holdout([1], 0.5) == ([1], [])
        assert split_holdout([1, 2], 0.0) == ([1, 2], [])

    def test_clipping(self, source):
        snap = source.load_hour(0, 0)[0]
        norm = CostNormalizer(np.full(24, -1.0), np.full(24, 1.0), baseline=False)
        assert norm(0.0, snap) == 0.5
        assert norm(5.0, snap) == 1.0 and norm(-5.0, snap) == 0.0

    def test_zero_span(self, source):
        snap = source.load_hour(0, 0)[0]
        assert CostNormalizer(np.zeros(24), np.zeros(24), False)(3.0, snap) == 0.0

    def test_baseline_shift(self, source):
        snap = source.load_hour(12, 0)[0]
        norm = CostNormalizer.identity(True)
        assert norm.shifted(1.0, snap) == pytest.approx(1.0 + snap.log_demand_sum)

    def test_round_trip(self):
        norm = CostNormalizer(np.arange(24.0), np.arange(24.0) + 1, True)
        back = CostNormalizer.from_dict(json.loads(json.dumps(norm.to_dict())))
        np.testing.assert_array_equal(back.lo, norm.lo)
        assert back.baseline

    def test_calibrated_costs_in_unit_interval(self, tiny, source):
        norm = calibrate(tiny, source, 0, [12])
        assert norm.lo[12] <= norm.hi[12]
        arms = ArmSpace(tiny.bandit.grids)
        for s in source.load_hour(12, 0):
            for th in arms.arms:
                assert 0.0 <= evaluate_arm(s, th, normalizer=norm).cost <= 1.0


class TestTraining:
    def test_schedule_is_permutation_per_epoch(self):
        sched = training_schedule(7, 3, 0, 4)
        assert len(sched) == 21
        for e in range(3):
            assert sorted(sched[7 * e:7 * (e + 1)]) == list(range(7))

    def test_deterministic(self, tiny, source):
        norm = calibrate(tiny, source, 0, [12, 13])
        a = train(tiny, source, 0, norm, [12, 13])
        b = train(tiny, source, 0, norm, [12, 13])
        for h in (12, 13):
            np.testing.assert_array_equal(a.contexts[h].x, b.contexts[h].x)

    @pytest.mark.parametrize("per_hour", [True, False])
    def test_resume_equals_uninterrupted(self, tiny, source, tmp_path, per_hour):
        cfg = tiny.replace(bandit={"per_hour": per_hour})
        norm = calibrate(cfg, source, 0, [12, 13, 14])
        full = train(cfg, source, 0, norm, [12, 13, 14])
        path = tmp_path / "ckpt.json"
        with pytest.raises(OSError):
            train(cfg, FailingSource(source, 13), 0, norm, [12, 13, 14], checkpoint_file=path)
        assert sorted(Checkpoint.load(path).contexts) == [12]
        resumed = train(cfg, source, 0, norm, [12, 13, 14], checkpoint=Checkpoint.load(path))
        for h in (12, 13, 14):
            np.testing.assert_array_equal(full.contexts[h].x, resumed.contexts[h].x)
            assert full.contexts[h].lam == resumed.contexts[h].lam

    def test_checkpoint_round_trip(self, tiny, source, tmp_path):
        norm = calibrate(tiny, source, 0, [5])
        ckpt = train(tiny, source, 0, norm, [5])
        back = Checkpoint.load(ckpt.save(tmp_path / "p.json"))
        np.testing.assert_array_equal(back.contexts[5].x, ckpt.contexts[5].x)
        assert back.grids == ckpt.grids and not (tmp_path / "p.json.tmp").exists()

    def test_bad_checkpoint(self, tmp_path):
        (tmp_path / "p.json").write_text(json.dumps({"format": "other"}))
        with pytest.raises(ValueError):
            Checkpoint.load(tmp_path / "p.json")

    def test_context_mode_mismatch(self, tiny, source):
        norm = calibrate(tiny, source, 0, [5])
        ckpt = train(tiny, source, 0, norm, [5])
        with pytest.raises(ValueError):
            train(tiny.replace(bandit={"per_hour": False}), source, 0, norm, [5], checkpoint=ckpt)

    def test_zero_step_size_keeps_uniform(self, tiny, source):
        cfg = tiny.replace(bandit={"eta": 0.0})
        ckpt = train(cfg, source, 0, calibrate(cfg, source, 0, [20]), [20])
        np.testing.assert_allclose(ckpt.contexts[20].x, 0.25)
        assert ckpt.contexts[20].t == 5

    def test_records_written(self, tiny, source, tmp_path):
        train(tiny, source, 0, calibrate(tiny, source, 0, [3]), [3], records_file=tmp_path / "r.csv")
        with open(tmp_path / "r.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 5
        assert all(0 <= float(r["cost"]) <= 1 for r in rows)


class TestEvaluation:
    def test_ntn_equivalent_arm_matches_benchmark(self, tiny, source):
        grids = {"epsilon": [0.75], "tau_nu": [0.0], "tau_rsrp_dbm": [-110.0], "alpha": [0.0]}
        cfg = tiny.replace(bandit={"grids": grids, "gamma": 0.0})
        arms = ArmSpace(grids)
        state = PolicyState.initial(1, Hyperparameters(0.1, 0.0, 0.0, 1.0))
        ckpt = Checkpoint(0, arms.to_dict(), CostNormalizer.identity(), {h: state for h in range(24)})
        ours = evaluate(cfg, source, ckpt, range(24), "argmax", setting="3gpp-ntn")
        ref = run_benchmark(cfg, source, 0, "ntn")
        for a, b in zip(ours, ref):
            assert a.unsatisfied_fraction == b.unsatisfied_fraction
            assert a.sum_throughput_bps == b.sum_throughput_bps
            assert a.tn_energy_wh == b.tn_energy_wh
            assert a.active_mbs == b.active_mbs

    def test_zero_ue_hour(self, tiny, source):
        (row,) = run_benchmark(tiny, source, 0, "ntn", [23])
        m = source.factory.geometry.n_terrestrial
        assert row.unsatisfied_fraction == 0.0 and row.sum_throughput_bps == 0.0
        assert row.tn_energy_wh == pytest.approx(m * tiny.energy.p0_w)

    def test_missing_hour_in_checkpoint(self, tiny, source):
        ckpt = train(tiny, source, 0, calibrate(tiny, source, 0, [1]), [1])
        with pytest.raises(KeyError):
            evaluate(tiny, source, ckpt, [2])

    def test_run_seed_rows(self, tiny, source):
        run = run_seed(tiny, 1, range(24), sweep=True, source=source)
        assert len(run.rows) == 72
        m = source.factory.geometry.n_terrestrial
        for r in run.rows:
            assert r.tn_energy_wh >= m * tiny.energy.p0_w * tiny.energy.slot_duration_s / 3600 - 1e-9
            assert 0 <= r.active_mbs <= m
        assert run.sweep.losses.shape == (24, 4)

    def test_oracle_budget_warning(self, tiny, source):
        cfg = tiny.replace(experiment={"oracle_budget_s": 1e-9})
        with pytest.warns(RuntimeWarning, match="budget"):
            oracle_sweep(cfg, source, 0, CostNormalizer.identity(), [5, 6])

    def test_regret_report(self, tiny, source):
        norm = calibrate(tiny, source, 0, [10, 11])
        sweep = oracle_sweep(tiny, source, 0, norm, [10, 11])
        ckpt = train(tiny, source, 0, norm, [10, 11])
        rep = regret_report(sweep, {"trained": policy_matrix(ckpt, sweep.hours, "argmax"),
                                    "uniform": uniform_policy(sweep)})
        assert np.all(rep.curves["uniform"][0] >= -1e-12)
        assert np.all(np.diff(rep.curves["trained"][1]) >= 0)
        oracle = sweep.oracle().losses
        uni = sweep.losses.mean(axis=1)
        assert rep.final("uniform")[0] == pytest.approx(float(np.sum(uni - oracle)))


class TestMetrics:
    def rows(self):
        return [HourlyMetrics(h, s, seed, 0.1 * seed, 1e6 + seed, 500.0, 3.0, 2)
                for s in ("bcomd", "3gpp-tn") for seed in range(3) for h in range(2)]

    def test_rejects_bad_fraction(self):
        with pytest.raises(ValueError):
            HourlyMetrics(0, "x", 0, 1.5, 0, 0, 0)

    def test_csv_round_trip(self, tmp_path):
        path = write_metrics_csv(self.rows(), tmp_path / "m.csv")
        with open(path) as fh:
            assert tuple(next(csv.reader(fh))) == CSV_COLUMNS
        assert read_metrics_csv(path) == self.rows()

    def test_merge_replaces(self, tmp_path):
        path = tmp_path / "m.csv"
        merge_metrics(path, self.rows())
        merge_metrics(path, [HourlyMetrics(0, "bcomd", 0, 0.9, 0, 0, 0, 1)])
        rows = read_metrics_csv(path)
        assert len(rows) == 12
        assert [r.unsatisfied_fraction for r in rows if (r.setting, r.seed, r.hour) == ("bcomd", 0, 0)] == [0.9]

    def test_aggregate_interval(self):
        summary = aggregate(self.rows())
        row = next(s for s in summary if s.setting == "bcomd" and s.hour == 0)
        v = np.array([0.0, 0.1, 0.2])
        assert row.mean["unsatisfied_fraction"] == pytest.approx(0.1)
        assert row.ci_half_width["unsatisfied_fraction"] == pytest.approx(
            stats.t.ppf(0.975, 2) * v.std(ddof=1) / np.sqrt(3))
        assert row.ci_half_width["tn_energy_wh"] == 0.0

    def test_plots(self, tmp_path):
        paths = plot_daily_profiles(aggregate(self.rows()), tmp_path, "svg")
        assert len(paths) == 3 and all(p.exists() for p in paths)
        path = plot_regret({"a": (np.arange(5.0), np.zeros(5))}, tmp_path / "r.svg")
        assert path.exists()


class TestCli:
    def test_parse_hours(self):
        assert parse_hours("0-2,20") == [0, 1, 2, 20]
        assert parse_hours(None) == list(range(24))
        for bad in ("25", "a-b", ",", "5-3"):
            with pytest.raises(ConfigError):
                parse_hours(bad)

    def test_config_error_exit_code(self, tmp_path):
        assert main(["generate", "--config", str(tmp_path / "none.yaml"), "--out", str(tmp_path)]) == 2
        bad = tmp_path / "bad.yaml"
        bad.write_text("radio: {nonsense: 1}\n")
        assert main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == 2
        assert main(["generate", "--desk-scale", "--hours", "30", "--out", str(tmp_path)]) == 2

    def test_io_error_exit_code(self, tiny_yaml, tmp_path):
        assert main(["calibrate", "--config", str(tiny_yaml), "--out", str(tmp_path)]) == 3
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["generate", "--config", str(tiny_yaml), "--out", str(blocker)]) == 3

    def test_end_to_end(self, tiny_yaml, tmp_path, capsys):
        base = ["--config", str(tiny_yaml), "--out", str(tmp_path), "--format", "svg"]
        for cmd in (["generate", "--csv"], ["calibrate"], ["train"], ["evaluate"], ["benchmark"],
                    ["oracle", "--hours", "10-11", "--max-snapshots", "1"], ["plot"]):
            assert main(cmd[:1] + base + cmd[1:]) == 0, cmd
        rows = read_metrics_csv(tmp_path / "metrics.csv")
        for setting in ("bcomd", "3gpp-tn", "3gpp-ntn"):
            for seed in (0, 1):
                assert sorted(r.hour for r in rows if r.setting == setting and r.seed == seed) == list(range(24))
        assert all(r.chosen_arm_index >= 0 for r in rows if r.setting == "bcomd")
        for name in ("corpus/seed_1/hour_23.csv", "summary.csv", "daily_satisfied.svg", "regret.csv", "regret_seed0.svg",
                     "oracle_seed1.npz", "policy_seed0.json", "records.csv"):
            assert (tmp_path / name).exists(), name
        # resuming a finished run trains nothing new
        before = (tmp_path / "records.csv").read_text()
        assert main(["train"] + base) == 0
        assert (tmp_path / "records.csv").read_text() == before
