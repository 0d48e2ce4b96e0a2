"""Benchmark harness: algorithm x noise matrix with CSV reporting.

Each cell of the matrix builds (or loads) the ground-truth volume,
corrupts it at the cell's noise level and seed, segments the configured
slice, and scores the labels against the truth slice.  Rows come out in
config order and all randomness is seeded per cell, so two runs of the
same config produce identical reports except for wall-clock columns.
"""

from __future__ import annotations

import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from voxseg.attraction import AttractionParams
from voxseg.errors import ValidationError
from voxseg.fcm import FcmConfig, gmm_fcm
from voxseg.metrics import defuzzify, evaluate_labels, relative_improvement
from voxseg.noise import NoiseSpec, add_noise
from voxseg.optimize import GaConfig, PsoConfig
from voxseg.phantom import PhantomSpec, generate_phantom
from voxseg.pipelines import ga_ifcm, ifcm, pso_ifcm, pso_ifcm_3d
from voxseg.volume import SliceRef, extract_slice, load_labels, load_volume

ALGORITHMS = ("fcm", "ifcm", "ifcmpso", "gaifcm", "3dpifcm")

REPORT_COLUMNS = ("algorithm", "noise_kind", "noise_percent", "seed", "cluster",
                  "UnS", "OS", "IncS", "lambda", "xi", "h", "v",
                  "iterations", "wall_time_ms", "status")
COMPARISON_COLUMNS = ("algorithm_a", "noise_kind", "noise_percent",
                      "mean_incs_a", "mean_incs_3dpifcm", "relative_improvement_pct")


@dataclass
class BenchConfig:
    algorithms: tuple[str, ...] = ("fcm", "3dpifcm")
    noise_kinds: tuple[str, ...] = ("gaussian",)
    noise_percents: tuple[float, ...] = (5.0,)
    seeds: tuple[int, ...] = (0, 1, 2)
    dims: tuple[int, int, int] = (96, 96, 96)
    shells: int = 4
    clusters: int | None = None      # defaults to the shell count
    slice_spec: str = "mid"          # "mid" or an axis:index reference
    volume_path: str | None = None   # segment an external volume instead
    truth_path: str | None = None
    fuzziness: float = 2.0
    tolerance: float = 0.01
    max_iterations: int = 150
    level: int = 2
    depth: int = 3
    decay: float = 1.1
    feature_weight: float = 0.5      # fixed weights for the plain ifcm entry
    spatial_weight: float = 0.5
    swarm_size: int = 50
    pso_max_iter: int = 20
    omega: float = 0.5
    phip: float = 0.5
    phig: float = 0.5
    minstep: float = 1e-8
    minfunc: float = 1e-8
    population: int = 50
    generations: int = 20
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.1
    probe_steps: int = 1
    literal_incs: bool = False
    per_cluster: bool = False

    def __post_init__(self):
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ValidationError(f"unknown algorithm {name!r}, expected one of {ALGORITHMS}")
        if not self.algorithms or not self.noise_kinds or not self.noise_percents or not self.seeds:
            raise ValidationError("benchmark matrix must have at least one cell")
        if (self.volume_path is None) != (self.truth_path is None):
            raise ValidationError("volume_path and truth_path must be given together")

    @property
    def cluster_count(self) -> int:
        return int(self.clusters) if self.clusters is not None else int(self.shells)

    def fcm_config(self) -> FcmConfig:
        return FcmConfig(self.fuzziness, self.tolerance, self.max_iterations)

    def pso_config(self, seed: int) -> PsoConfig:
        return PsoConfig(swarm_size=self.swarm_size, omega=self.omega,
                         phip=self.phip, phig=self.phig, max_iter=self.pso_max_iter,
                         minstep=self.minstep, minfunc=self.minfunc, seed=seed)

    def ga_config(self, seed: int) -> GaConfig:
        return GaConfig(population=self.population, generations=self.generations,
                        crossover_rate=self.crossover_rate, mutation_rate=self.mutation_rate,
                        mutation_sigma=self.mutation_sigma, minfunc=self.minfunc, seed=seed)


def resolve_slice(spec: str, dims: tuple[int, int, int]) -> SliceRef:
    if spec == "mid":
        return SliceRef("z", dims[2] // 2)
    return SliceRef.parse(spec)


def _source(cfg: BenchConfig):
    if cfg.volume_path is not None:
        return load_volume(cfg.volume_path), load_labels(cfg.truth_path)
    vol, truth = generate_phantom(PhantomSpec(dims=cfg.dims, num_shells=cfg.shells))
    return vol, truth


def _segment(cfg: BenchConfig, algorithm: str, noisy, ref: SliceRef, seed: int):
    fcm_cfg = cfg.fcm_config()
    if algorithm == "fcm":
        fit = gmm_fcm(extract_slice(noisy, ref), cfg.cluster_count, fcm_cfg)
        labels = defuzzify(fit.membership, extract_slice(noisy, ref).dims)
        return labels, {"iterations": fit.iterations, "lambda": "", "xi": "",
                        "h": "", "v": ""}
    if algorithm == "ifcm":
        params = AttractionParams(feature_weight=cfg.feature_weight,
                                  spatial_weight=cfg.spatial_weight, level=cfg.level)
        plane = extract_slice(noisy, ref)
        fit = gmm_fcm(plane, cfg.cluster_count, fcm_cfg)
        result = ifcm(plane, params, init=(fit.membership, fit.centers), cfg=fcm_cfg)
        return result.labels, {"iterations": result.iterations,
                               "lambda": result.feature_weight, "xi": result.spatial_weight,
                               "h": "", "v": ""}
    if algorithm == "ifcmpso":
        result = pso_ifcm(extract_slice(noisy, ref), cfg.cluster_count, fcm_cfg,
                          AttractionParams(level=cfg.level), cfg.pso_config(seed),
                          probe_steps=cfg.probe_steps)
        return result.labels, {"iterations": result.iterations,
                               "lambda": result.feature_weight, "xi": result.spatial_weight,
                               "h": "", "v": ""}
    if algorithm == "gaifcm":
        result = ga_ifcm(extract_slice(noisy, ref), cfg.cluster_count, fcm_cfg,
                         AttractionParams(level=cfg.level), cfg.ga_config(seed),
                         probe_steps=cfg.probe_steps)
        return result.labels, {"iterations": result.iterations,
                               "lambda": result.feature_weight, "xi": result.spatial_weight,
                               "h": "", "v": ""}
    result = pso_ifcm_3d(noisy, ref, cfg.cluster_count, cfg.depth, cfg.decay,
                         fcm_cfg, cfg.pso_config(seed), probe_steps=cfg.probe_steps)
    return result.labels, {"iterations": result.iterations,
                           "lambda": result.feature_weight, "xi": result.spatial_weight,
                           "h": cfg.decay, "v": cfg.depth}


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def run_cell(cfg: BenchConfig, algorithm: str, kind: str, percent: float,
             seed: int) -> list[dict]:
    """One matrix cell; failures land in the status column, not the caller."""
    vol, truth = _source(cfg)
    ref = resolve_slice(cfg.slice_spec, vol.dims)
    started = time.perf_counter()
    base = {"algorithm": algorithm, "noise_kind": kind, "noise_percent": _fmt(float(percent)),
            "seed": seed, "lambda": "", "xi": "", "h": "", "v": "", "iterations": ""}
    try:
        noisy = add_noise(vol, NoiseSpec(kind, percent, seed))
        labels, info = _segment(cfg, algorithm, noisy, ref, seed)
        scores = evaluate_labels(labels, extract_slice(truth, ref),
                                 cfg.cluster_count, cfg.literal_incs)
    except Exception as exc:  # keep the sweep alive; the row records why
        row = dict(base)
        row.update({"cluster": "", "UnS": "", "OS": "", "IncS": "",
                    "wall_time_ms": _fmt((time.perf_counter() - started) * 1000.0),
                    "status": f"error: {exc}"})
        return [row]
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    base.update({k: _fmt(v) if isinstance(v, float) else v for k, v in info.items()})
    rows = []
    if cfg.per_cluster:
        for entry in scores["per_cluster"]:
            row = dict(base)
            row.update({"cluster": entry["cluster"], "UnS": _fmt(entry["uns"]),
                        "OS": _fmt(entry["os"]), "IncS": _fmt(entry["incs"]),
                        "wall_time_ms": _fmt(elapsed_ms), "status": "ok"})
            rows.append(row)
    row = dict(base)
    row.update({"cluster": "mean", "UnS": _fmt(scores["mean_uns"]),
                "OS": _fmt(scores["mean_os"]), "IncS": _fmt(scores["mean_incs"]),
                "wall_time_ms": _fmt(elapsed_ms), "status": "ok"})
    rows.append(row)
    return rows


def _cells(cfg: BenchConfig):
    for algorithm in cfg.algorithms:
        for kind in cfg.noise_kinds:
            for percent in cfg.noise_percents:
                for seed in cfg.seeds:
                    yield algorithm, kind, percent, seed


def run_benchmark(cfg: BenchConfig, threads: int = 1,
                  log=None) -> tuple[list[dict], list[dict]]:
    """Run the whole matrix; returns (report rows, comparison rows)."""
    if int(threads) < 1:
        raise ValidationError("threads must be at least 1")
    cells = list(_cells(cfg))
    if threads == 1:
        groups = [run_cell(cfg, *cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=int(threads)) as pool:
            futures = [pool.submit(run_cell, cfg, *cell) for cell in cells]
            groups = [f.result() for f in futures]
    rows = []
    for cell, group in zip(cells, groups):
        if log is not None:
            mean = next((r["IncS"] for r in group if r["cluster"] == "mean"), "")
            status = group[-1]["status"]
            log(f"{cell[0]} {cell[1]} {cell[2]}% seed={cell[3]} "
                f"IncS={mean or 'n/a'} [{status}]")
        rows.extend(group)
    return rows, comparison_rows(cfg, rows)


def comparison_rows(cfg: BenchConfig, rows: list[dict]) -> list[dict]:
    """Mean-IncS comparison of every other algorithm against 3dpifcm."""
    if "3dpifcm" not in cfg.algorithms:
        return []

    def mean_incs(algorithm, kind, percent):
        vals = [float(r["IncS"]) for r in rows
                if r["algorithm"] == algorithm and r["noise_kind"] == kind
                and r["noise_percent"] == _fmt(float(percent))
                and r["cluster"] == "mean" and r["status"] == "ok"]
        return float(np.mean(vals)) if vals else None

    out = []
    for algorithm in cfg.algorithms:
        if algorithm == "3dpifcm":
            continue
        for kind in cfg.noise_kinds:
            for percent in cfg.noise_percents:
                ours = mean_incs("3dpifcm", kind, percent)
                other = mean_incs(algorithm, kind, percent)
                if ours is None or other is None:
                    continue
                try:
                    gain = _fmt(relative_improvement(other, ours))
                except Exception:
                    gain = ""
                out.append({"algorithm_a": algorithm, "noise_kind": kind,
                            "noise_percent": _fmt(float(percent)),
                            "mean_incs_a": _fmt(other), "mean_incs_3dpifcm": _fmt(ours),
                            "relative_improvement_pct": gain})
    return out


def run_sweep(cfg: BenchConfig, param: str, grid, algorithm: str,
              threads: int = 1, log=None) -> list[dict]:
    """Vary one hyperparameter over ``grid`` with everything else fixed."""
    if param not in ("h", "v", "percent"):
        raise ValidationError(f"sweep parameter must be h, v or percent, got {param!r}")
    out = []
    for value in grid:
        if param == "h":
            point = replace(cfg, algorithms=(algorithm,), decay=float(value))
        elif param == "v":
            point = replace(cfg, algorithms=(algorithm,), depth=int(value))
        else:
            point = replace(cfg, algorithms=(algorithm,),
                            noise_percents=(float(value),))
        rows, _ = run_benchmark(point, threads=threads, log=log)
        good = [float(r["IncS"]) for r in rows
                if r["cluster"] == "mean" and r["status"] == "ok"]
        out.append({
            "param": param,
            "value": _fmt(float(value)),
            "algorithm": algorithm,
            "noise_kind": ",".join(point.noise_kinds),
            "noise_percent": ",".join(_fmt(float(p)) for p in point.noise_percents),
            "seeds": ",".join(str(s) for s in point.seeds),
            "mean_incs": _fmt(float(np.mean(good))) if good else "",
        })
    return out


SWEEP_COLUMNS = ("param", "value", "algorithm", "noise_kind", "noise_percent",
                 "seeds", "mean_incs")


def write_csv(rows: list[dict], columns, path_or_handle) -> None:
    if hasattr(path_or_handle, "write"):
        writer = csv.DictWriter(path_or_handle, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return
    with open(path_or_handle, "w", newline="") as fh:
        write_csv(rows, columns, fh)
