import numpy as np
import pytest

from polypin.cli import main
from polypin.harness import (KINDS, PRESETS, ExperimentSpec, ResultTable, emit, load_spec, named_profile, preset,
                             run_experiment, spec_from_mapping)
from polypin.stefan.front_tracking import check_stefan_data


def tiny(kind, **kw):
    return ExperimentSpec(kind=kind, **kw)


class TestSpec:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ExperimentSpec(kind="nonsense")

    def test_repulsive_needs_subcritical(self):
        with pytest.raises(ValueError):
            ExperimentSpec(kind="repulsive-limit", lam=3.0)
        with pytest.raises(ValueError):
            ExperimentSpec(kind="repulsive-limit", lam="inf")

    def test_fourier_range(self):
        with pytest.raises(ValueError):
            ExperimentSpec(kind="fourier-decay", lam=1.0)

    def test_sticky_needs_infinite(self):
        with pytest.raises(ValueError):
            ExperimentSpec(kind="sticky-limit", lam=1.0)

    def test_hash_changes_with_any_field(self):
        base = ExperimentSpec(kind="fourier-decay", lam=1.5)
        h = base.config_hash()
        assert base.replace(seeds=2).config_hash() != h
        assert base.replace(L=(64,)).config_hash() != h
        assert base.replace(lam=1.6).config_hash() != h
        assert base.replace(params={"x": 1}).config_hash() != h
        assert ExperimentSpec(kind="fourier-decay", lam=1.5).config_hash() == h

    def test_hash_ignores_output_location(self):
        base = ExperimentSpec(kind="fourier-decay", lam=1.5)
        assert base.replace(out_dir="elsewhere", threads=4).config_hash() == base.config_hash()

    def test_mapping_lists_and_strings(self):
        spec = spec_from_mapping({"kind": "repulsive-limit", "L": "32, 64", "times": [0, 0.1], "mode": "x"})
        assert spec.L == (32, 64)
        assert spec.times == (0.0, 0.1)
        assert spec.params == {"mode": "x"}

    def test_load_yaml(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("kind: sticky-limit\nlam: inf\nL: 16\nseeds: 2\n")
        spec = load_spec(path)
        assert spec.kind == "sticky-limit" and spec.L == (16,) and spec.seeds == 2

    def test_load_rejects_non_mapping(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("- a\n- b\n")
        with pytest.raises(ValueError):
            load_spec(path)

    def test_every_criterion_has_a_preset(self):
        assert sorted(PRESETS, key=lambda k: int(k.split("-")[1])) == [f"criterion-{i}" for i in range(1, 12)]
        for name in PRESETS:
            assert preset(name).kind in KINDS

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            preset("criterion-99")


class TestProfiles:
    @pytest.mark.parametrize("name", ["cosine", "tent", "dipped-cosine", "neg-cosine"])
    def test_named_admissible(self, name):
        check_stefan_data(named_profile(name))

    def test_csv_profile(self, tmp_path):
        p = named_profile("tent", 64)
        path = tmp_path / "f0.csv"
        path.write_text(p.to_csv())
        q = named_profile(str(path))
        np.testing.assert_allclose(q.values, p.values)

    def test_unknown(self):
        with pytest.raises(ValueError):
            named_profile("no-such-shape")

    def test_sticky_rejects_inadmissible(self):
        with pytest.raises(ValueError):
            run_experiment(tiny("sticky-limit", profile="zero", lam="inf", L=(8,)))


class TestEmit:
    def test_empty_table_header_only(self, tmp_path):
        table = ResultTable(ExperimentSpec(kind="heat-study"))
        csv_path, sum_path = emit(table, tmp_path)
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("# config_hash=") and "version=" in lines[0] and "seeds=" in lines[0]
        assert lines[1] == "L,seed,t,sup_distance,area,fourier,contacts,termination"
        assert sum_path.exists()

    def test_byte_identical_rerun(self, tmp_path):
        spec = tiny("repulsive-limit", L=(16,), seeds=3, lam=1.0, times=(0.0, 0.05, 0.1), tolerance=0.5,
                    fraction=0.5)
        a, _ = emit(run_experiment(spec), tmp_path / "a")
        b, _ = emit(run_experiment(spec), tmp_path / "b")
        assert a.read_bytes() == b.read_bytes()

    def test_threads_do_not_change_output(self):
        spec = tiny("fourier-decay", L=(16,), seeds=4, lam=1.5, times=(0.05, 0.1), tolerance=0.5)
        assert run_experiment(spec).to_csv() == run_experiment(spec.replace(threads=2)).to_csv()

    def test_rows_traceable(self):
        spec = tiny("repulsive-limit", L=(16,), seeds=2, lam=1.0, times=(0.0, 0.1), tolerance=0.5)
        table = run_experiment(spec)
        assert {row["seed"] for row in table.rows} == set(spec.seed_list())
        assert table.config_hash in table.to_csv()


class TestRunners:
    def test_repulsive_zero_profile(self):
        # the flat start relaxes to equilibrium heights of order sqrt(L)
        L = 64
        spec = tiny("repulsive-limit", profile="zero", L=(L,), seeds=4, lam=1.0, times=(0.0, 0.1, 0.2),
                    tolerance=1.0 / L + 2.0 / np.sqrt(L))
        table = run_experiment(spec)
        assert table.passed

    def test_repulsive_lambda_zero_vs_one(self):
        times = (0.1, 0.2)
        means = {}
        for lam in (0.0, 1.0):
            spec = tiny("repulsive-limit", L=(64,), seeds=8, lam=lam, times=times, tolerance=1.0)
            rows = run_experiment(spec).rows
            means[lam] = np.mean([r["area"] for r in rows if r["t"] == 0.2])
        assert abs(means[0.0] - means[1.0]) < 0.05

    def test_sticky_small(self):
        spec = tiny("sticky-limit", L=(32,), seeds=3, lam="inf", times=(0.0, 0.1, 0.2, 0.5), tolerance=0.5,
                    fraction=0.5, dx=1 / 128)
        table = run_experiment(spec)
        assert table.summary["L=32 absorbed_fraction"] == 1.0
        assert len(table.criteria) == 2

    def test_termination_time(self):
        spec = tiny("termination-time", L=(32,), seeds=10, lam="inf", tolerance=0.25)
        table = run_experiment(spec)
        assert table.summary["L=32 absorbed_fraction"] == 1.0
        assert table.passed

    def test_fourier_small(self):
        spec = tiny("fourier-decay", L=(32,), seeds=4, lam=1.5, times=(0.05, 0.1), tolerance=0.5)
        table = run_experiment(spec)
        assert len(table.rows) == 8
        assert len(table.criteria) == 1

    def test_contact_decay_flags_small_ensembles(self):
        spec = tiny("contact-decay", L=(32,), seeds=1, lam=1.5,
                    params={"t_min": 10, "t_max": 200, "n_times": 3, "margin": 8, "eq_l": 4, "eq_seeds": 10,
                            "eq_span": 4.0})
        table = run_experiment(spec)
        names = [c.name for c in table.criteria]
        assert any("ensemble large enough" in n for n in names)
        assert "equilibrium_slope_same_range" in table.summary

    def test_heat_study(self):
        spec = tiny("heat-study", profile="tent", times=(0.05, 0.1))
        assert run_experiment(spec).passed

    def test_oracle_check(self):
        spec = tiny("oracle-check", params={"L_max": 3})
        assert run_experiment(spec).passed

    def test_coupling_check(self):
        spec = tiny("coupling-check", L=(12,), params={"pairs": 8})
        table = run_experiment(spec)
        assert table.passed and len(table.rows) == 8

    def test_agmon_check(self):
        spec = tiny("agmon-check", params={"profiles": 20})
        assert run_experiment(spec).passed

    def test_stefan_study_collision(self):
        spec = tiny("stefan-study", dx=1 / 128, params={"mode": "collision"})
        assert run_experiment(spec).passed

    def test_stefan_study_unknown_mode(self):
        with pytest.raises(ValueError):
            run_experiment(tiny("stefan-study", params={"mode": "nope"}))


class TestCli:
    def test_compare_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(f"kind: heat-study\nprofile: tent\ntimes: 0.1\nout_dir: {tmp_path / 'out'}\n")
        assert main(["compare", "--config", str(cfg)]) == 0
        assert (tmp_path / "out" / "heat-study.csv").exists()
        assert "PASS" in capsys.readouterr().out

    def test_compare_failing_criterion_exit_code(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(f"kind: heat-study\nprofile: tent\ntimes: 0.1\nagreement: 1e-30\nout_dir: {tmp_path}\n")
        assert main(["compare", "--config", str(cfg)]) == 1

    def test_compare_preset(self, tmp_path):
        assert main(["compare", "--preset", "criterion-5", "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "oracle-equivalence_summary.txt").exists()

    def test_sweep(self, tmp_path):
        assert main(["sweep", "--preset", "criterion-5", "--preset", "criterion-11", "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "agmon.csv").exists()

    def test_simulate(self, tmp_path):
        assert main(["simulate", "--L", "16", "--lam", "inf", "--profile", "tent", "--horizon", "1",
                     "--out-dir", str(tmp_path), "--seed", "3"]) == 0
        snaps = (tmp_path / "snapshots.txt").read_text().splitlines()
        assert len(snaps) == 11
        assert snaps[-1].split()[1:] == [str(v % 2) for v in range(33)]

    def test_simulate_eta_min(self, tmp_path):
        assert main(["simulate", "--L", "8", "--profile", "eta-min", "--out-dir", str(tmp_path)]) == 0

    def test_heat(self, tmp_path):
        assert main(["heat", "--profile", "tent", "--times", "0.1", "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "heat_t0.1.csv").exists()

    def test_stefan(self, tmp_path):
        assert main(["stefan", "--dx", "0.015625", "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "stefan.csv").exists() and (tmp_path / "stefan_diagnostics.txt").exists()

    def test_equilibrium(self, tmp_path, capsys):
        assert main(["equilibrium", "--L", "4", "--lam", "1", "--out-dir", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "log Z = 2.63905" in out  # log 14

    def test_bad_input_exit_code(self, tmp_path):
        assert main(["compare", "--preset", "nope", "--out-dir", str(tmp_path)]) == 2
