"""Benchmark harness: cell rows, comparisons, sweeps, CSV output."""

import io
from dataclasses import replace

import numpy as np
import pytest

from voxseg.bench import (ALGORITHMS, COMPARISON_COLUMNS, REPORT_COLUMNS,
                          SWEEP_COLUMNS, BenchConfig, comparison_rows,
                          resolve_slice, run_benchmark, run_cell, run_sweep,
                          write_csv)
from voxseg.errors import ValidationError
from voxseg.fcm import FcmConfig, gmm_fcm
from voxseg.metrics import defuzzify, evaluate_labels, relative_improvement
from voxseg.noise import NoiseSpec, add_noise
from voxseg.phantom import PhantomSpec, generate_phantom
from voxseg.volume import SliceRef, extract_slice, save_volume


def small_config(**overrides) -> BenchConfig:
    base = dict(algorithms=("fcm",), noise_kinds=("gaussian",),
                noise_percents=(5.0,), seeds=(0,), dims=(24, 24, 24), shells=2,
                swarm_size=4, pso_max_iter=2, population=6, generations=2)
    base.update(overrides)
    return BenchConfig(**base)


def reference_scores(cfg: BenchConfig, kind: str, percent: float, seed: int):
    # mirror of the fcm cell: phantom -> noise -> slice -> fcm -> score
    vol, truth = generate_phantom(PhantomSpec(dims=cfg.dims, num_shells=cfg.shells))
    noisy = add_noise(vol, NoiseSpec(kind, percent, seed))
    ref = resolve_slice(cfg.slice_spec, vol.dims)
    plane = extract_slice(noisy, ref)
    fit = gmm_fcm(plane, cfg.cluster_count, cfg.fcm_config())
    labels = defuzzify(fit.membership, plane.dims)
    scores = evaluate_labels(labels, extract_slice(truth, ref),
                             cfg.cluster_count, cfg.literal_incs)
    return scores, fit.iterations


class TestResolveSlice:
    def test_mid_is_middle_z_plane(self):
        ref = resolve_slice("mid", (24, 24, 24))
        assert (ref.axis, ref.index) == ("z", 12)
        ref = resolve_slice("mid", (10, 10, 31))
        assert (ref.axis, ref.index) == ("z", 15)

    def test_explicit_reference_passes_through(self):
        ref = resolve_slice("y:3", (24, 24, 24))
        assert (ref.axis, ref.index) == ("y", 3)

    def test_bad_reference_rejected(self):
        with pytest.raises(ValidationError):
            resolve_slice("q:1", (24, 24, 24))


class TestConfigValidation:
    def test_unknown_algorithm(self):
        with pytest.raises(ValidationError):
            small_config(algorithms=("fcm", "kmeans"))

    def test_empty_matrix_axis(self):
        with pytest.raises(ValidationError):
            small_config(seeds=())
        with pytest.raises(ValidationError):
            small_config(noise_percents=())
        with pytest.raises(ValidationError):
            small_config(algorithms=())

    def test_volume_requires_truth(self):
        with pytest.raises(ValidationError):
            small_config(volume_path="vol.vxf")
        with pytest.raises(ValidationError):
            small_config(truth_path="truth.vxf")

    def test_cluster_count_defaults_to_shells(self):
        assert small_config(shells=3).cluster_count == 3
        assert small_config(shells=3, clusters=2).cluster_count == 2


class TestRunCell:
    def test_fcm_mean_row_matches_direct_scoring(self):
        cfg = small_config()
        rows = run_cell(cfg, "fcm", "gaussian", 5.0, 0)
        assert len(rows) == 1
        row = rows[0]
        scores, iterations = reference_scores(cfg, "gaussian", 5.0, 0)
        assert row["algorithm"] == "fcm"
        assert row["noise_kind"] == "gaussian"
        assert row["noise_percent"] == "5"
        assert row["seed"] == 0
        assert row["cluster"] == "mean"
        assert row["UnS"] == format(scores["mean_uns"], ".10g")
        assert row["OS"] == format(scores["mean_os"], ".10g")
        assert row["IncS"] == format(scores["mean_incs"], ".10g")
        assert row["iterations"] == iterations
        assert (row["lambda"], row["xi"], row["h"], row["v"]) == ("", "", "", "")
        assert row["status"] == "ok"
        assert float(row["wall_time_ms"]) > 0.0
        assert set(row) == set(REPORT_COLUMNS)

    def test_per_cluster_rows_precede_mean(self):
        cfg = small_config(per_cluster=True)
        rows = run_cell(cfg, "fcm", "gaussian", 5.0, 0)
        assert len(rows) == cfg.cluster_count + 1
        assert [r["cluster"] for r in rows] == [0, 1, "mean"]
        scores, _ = reference_scores(cfg, "gaussian", 5.0, 0)
        for row, entry in zip(rows, scores["per_cluster"]):
            assert row["cluster"] == entry["cluster"]
            assert row["IncS"] == format(entry["incs"], ".10g")

    def test_literal_error_share(self):
        cfg = small_config(literal_incs=True, noise_percents=(20.0,))
        rows = run_cell(cfg, "fcm", "gaussian", 20.0, 0)
        scores, _ = reference_scores(cfg, "gaussian", 20.0, 0)
        assert rows[0]["IncS"] == format(scores["mean_incs"], ".10g")
        assert float(rows[0]["IncS"]) > 0.0
        plain, _ = reference_scores(replace(cfg, literal_incs=False),
                                    "gaussian", 20.0, 0)
        assert scores["mean_incs"] != plain["mean_incs"]

    def test_volumetric_pipeline_reports_its_settings(self):
        cfg = small_config(dims=(16, 16, 16), decay=1.5, depth=2)
        rows = run_cell(cfg, "3dpifcm", "gaussian", 5.0, 0)
        row = rows[0]
        assert row["status"] == "ok"
        assert row["h"] == "1.5"
        assert row["v"] == 2
        assert 0.0 <= float(row["lambda"]) <= 1.0
        assert 0.0 <= float(row["xi"]) <= 1.0
        assert row["iterations"] >= 1

    def test_failure_becomes_status_row(self):
        cfg = small_config()
        rows = run_cell(cfg, "fcm", "gaussian", 150.0, 0)
        assert len(rows) == 1
        row = rows[0]
        assert row["status"].startswith("error:")
        assert (row["cluster"], row["UnS"], row["OS"], row["IncS"]) == ("", "", "", "")
        assert row["wall_time_ms"] != ""

    def test_external_volume_source(self, tmp_path):
        cfg = small_config()
        vol, truth = generate_phantom(PhantomSpec(dims=cfg.dims,
                                                  num_shells=cfg.shells))
        vol_path = tmp_path / "vol.vxf"
        truth_path = tmp_path / "truth.vxf"
        save_volume(vol, vol_path)
        save_volume(truth, truth_path)
        external = replace(cfg, volume_path=str(vol_path),
                           truth_path=str(truth_path))
        assert strip_times(run_cell(external, "fcm", "gaussian", 5.0, 0)) == \
            strip_times(run_cell(cfg, "fcm", "gaussian", 5.0, 0))


def strip_times(rows):
    return [{k: v for k, v in row.items() if k != "wall_time_ms"} for row in rows]


class TestRunBenchmark:
    def test_rows_follow_config_order(self):
        cfg = small_config(algorithms=("fcm", "ifcm"), seeds=(0, 1))
        rows, _ = run_benchmark(cfg)
        key = [(r["algorithm"], r["seed"]) for r in rows]
        assert key == [("fcm", 0), ("fcm", 1), ("ifcm", 0), ("ifcm", 1)]

    def test_repeat_runs_identical_up_to_wall_time(self):
        cfg = small_config(algorithms=("fcm", "ifcm"))
        first, first_cmp = run_benchmark(cfg)
        second, second_cmp = run_benchmark(cfg)
        assert strip_times(first) == strip_times(second)
        assert first_cmp == second_cmp

    def test_worker_processes_match_serial_run(self):
        cfg = small_config(algorithms=("fcm",), seeds=(0, 1))
        serial, _ = run_benchmark(cfg, threads=1)
        parallel, _ = run_benchmark(cfg, threads=2)
        assert strip_times(serial) == strip_times(parallel)

    def test_thread_count_validated(self):
        with pytest.raises(ValidationError):
            run_benchmark(small_config(), threads=0)

    def test_log_line_per_cell(self):
        cfg = small_config(seeds=(0, 1))
        lines = []
        rows, _ = run_benchmark(cfg, log=lines.append)
        assert len(lines) == 2
        assert lines[0].startswith("fcm gaussian 5.0% seed=0 IncS=")
        assert lines[0].endswith("[ok]")


class TestComparison:
    def test_rows_against_reference_means(self):
        cfg = small_config(algorithms=("fcm", "3dpifcm"), dims=(16, 16, 16),
                           noise_percents=(15.0,), seeds=(0, 1))
        rows, comparison = run_benchmark(cfg)

        def mean_incs(algorithm):
            vals = [float(r["IncS"]) for r in rows
                    if r["algorithm"] == algorithm and r["cluster"] == "mean"]
            return float(np.mean(vals))

        assert len(comparison) == 1
        row = comparison[0]
        assert row["algorithm_a"] == "fcm"
        assert row["noise_kind"] == "gaussian"
        assert row["noise_percent"] == "15"
        assert float(row["mean_incs_a"]) == pytest.approx(mean_incs("fcm"), rel=1e-9)
        assert float(row["mean_incs_3dpifcm"]) == pytest.approx(
            mean_incs("3dpifcm"), rel=1e-9)
        assert mean_incs("fcm") > 0.0
        expected = relative_improvement(mean_incs("fcm"), mean_incs("3dpifcm"))
        assert float(row["relative_improvement_pct"]) == pytest.approx(
            expected, rel=1e-6)
        assert set(row) == set(COMPARISON_COLUMNS)

    def test_gain_left_blank_when_reference_is_perfect(self):
        # the reference run makes no errors here, so the percent gain has
        # no defined value and the column stays empty
        cfg = small_config(algorithms=("fcm", "3dpifcm"), dims=(16, 16, 16),
                           seeds=(0, 1))
        rows, comparison = run_benchmark(cfg)
        assert comparison[0]["mean_incs_a"] == "0"
        assert comparison[0]["relative_improvement_pct"] == ""

    def test_empty_without_volumetric_entry(self):
        cfg = small_config(algorithms=("fcm", "ifcm"))
        rows, comparison = run_benchmark(cfg)
        assert comparison == []

    def test_failed_cells_drop_out_of_the_means(self):
        cfg = small_config(algorithms=("fcm", "3dpifcm"))
        rows, _ = run_benchmark(cfg)
        # forge an extra failed cell; it must not influence the means
        forged = rows + [dict(rows[0], status="error: boom", IncS="99")]
        assert comparison_rows(cfg, forged) == comparison_rows(cfg, rows)


class TestSweep:
    def test_noise_axis(self):
        cfg = small_config()
        rows = run_sweep(cfg, "percent", (5.0, 9.0), "fcm")
        assert [r["value"] for r in rows] == ["5", "9"]
        for row, percent in zip(rows, (5.0, 9.0)):
            assert row["param"] == "percent"
            assert row["algorithm"] == "fcm"
            assert row["noise_kind"] == "gaussian"
            assert row["noise_percent"] == row["value"]
            assert row["seeds"] == "0"
            scores, _ = reference_scores(cfg, "gaussian", percent, 0)
            assert float(row["mean_incs"]) == pytest.approx(
                scores["mean_incs"], abs=1e-12)
            assert set(row) == set(SWEEP_COLUMNS)

    def test_shell_decay_axis_overrides_config(self):
        cfg = small_config(dims=(16, 16, 16), depth=2)
        rows = run_sweep(cfg, "h", (0.9,), "3dpifcm")
        assert rows[0]["value"] == "0.9"
        bench_rows, _ = run_benchmark(replace(cfg, algorithms=("3dpifcm",),
                                              decay=0.9))
        assert float(rows[0]["mean_incs"]) == pytest.approx(
            float(bench_rows[0]["IncS"]), abs=1e-12)

    def test_depth_axis_coerces_to_int(self):
        cfg = small_config(dims=(16, 16, 16))
        rows = run_sweep(cfg, "v", (2.0,), "3dpifcm")
        assert rows[0]["value"] == "2"
        assert rows[0]["mean_incs"] != ""

    def test_unknown_parameter(self):
        with pytest.raises(ValidationError):
            run_sweep(small_config(), "m", (2.0,), "fcm")


class TestWriteCsv:
    ROWS = [{"param": "h", "value": "1.5", "algorithm": "3dpifcm",
             "noise_kind": "gaussian", "noise_percent": "5", "seeds": "0,1",
             "mean_incs": "0.01"}]

    def test_handle_output(self):
        buf = io.StringIO()
        write_csv(self.ROWS, SWEEP_COLUMNS, buf)
        assert buf.getvalue() == (
            "param,value,algorithm,noise_kind,noise_percent,seeds,mean_incs\n"
            'h,1.5,3dpifcm,gaussian,5,"0,1",0.01\n')

    def test_path_output_uses_unix_line_endings(self, tmp_path):
        out = tmp_path / "sweep.csv"
        write_csv(self.ROWS, SWEEP_COLUMNS, out)
        raw = out.read_bytes()
        assert b"\r" not in raw
        assert raw.decode().splitlines()[0] == ",".join(SWEEP_COLUMNS)
