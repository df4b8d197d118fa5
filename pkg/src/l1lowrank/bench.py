"""Benchmark runner: (instance x algorithm x seed) cells, ratios against
instance OPT bounds, deterministic CSV output."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributed import run_arbitrary_partition, run_row_partition, split_arbitrary, split_rows
from .emd import fit_emd
from .errors import InvalidInputError
from .instances import InstanceSpec, gen_instance, opt_bound
from .linalg import entrywise_norm, svd_truncate
from .lowrank import (
    FitConfig,
    bicriteria_fit,
    cur_decompose,
    fit_input_sparsity,
    fit_lp,
    fit_polyklogd,
    fit_subset_enum,
)
from .matrix_io import fmt

COLUMNS = ("instance", "algo_tag", "k", "seed", "cost_l1", "opt_bound", "ratio", "elapsed_ms", "comm_words")
ALGOS = ("svd", "bicriteria", "input-sparsity", "polyklogd", "subset-enum", "lp", "emd", "cur",
         "dist-arbitrary", "dist-row")


@dataclass
class BenchConfig:
    instances: list
    algos: list
    seeds: list = field(default_factory=lambda: [0])
    k: int | None = None
    p: float = 1.5
    r: int = 2
    preset: str = "practical"
    machines: int = 2
    record_timing: bool = False

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchConfig":
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown config keys {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.instances = [s if isinstance(s, InstanceSpec) else InstanceSpec(**s) for s in cfg.instances]
        bad = [a for a in cfg.algos if a not in ALGOS]
        if bad:
            raise InvalidInputError(f"unknown algorithm tags {bad}; known: {list(ALGOS)}")
        return cfg


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in self.rows:
            w.writerow([_cell(row.get(c)) for c in COLUMNS])
        return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def run_cell(A, spec: InstanceSpec, algo: str, k: int, seed: int, cfg: BenchConfig):
    """``(cost, comm_words)`` of one algorithm on one instance."""
    fc = FitConfig(seed=seed, preset=cfg.preset)
    if algo == "svd":
        return entrywise_norm(A - svd_truncate(A, k), 1.0), None
    if algo == "bicriteria":
        return bicriteria_fit(A, k, cfg=fc).cost_l1, None
    if algo == "input-sparsity":
        return fit_input_sparsity(A, k, fc).cost_l1, None
    if algo == "polyklogd":
        return fit_polyklogd(A, k, fc).cost_l1, None
    if algo == "subset-enum":
        return fit_subset_enum(A, k, max(cfg.r, k), fc).cost_l1, None
    if algo == "lp":
        return fit_lp(A, k, cfg.p, fc).cost_l1, None
    if algo == "cur":
        return cur_decompose(A, k, fc).cost_l1, None
    if algo == "emd":
        delta = math.isqrt(A.shape[0])
        return fit_emd([c.reshape(delta, delta) for c in A.T], k, fc, exact=False).cost_l1, None
    if algo == "dist-arbitrary":
        fit, log = run_arbitrary_partition(split_arbitrary(A, cfg.machines, seed), k, seed, True, fc)
        return fit.cost_l1, log.total_words
    if algo == "dist-row":
        fit, log = run_row_partition(split_rows(A, cfg.machines), k, seed, True, fc)
        return fit.cost_l1, log.total_words
    raise InvalidInputError(f"unknown algorithm tag {algo!r}")


def run_benchmark(config) -> BenchReport:
    """``config`` is a JSON path, a dict, or a ``BenchConfig``."""
    if isinstance(config, (str, Path)):
        config = json.loads(Path(config).read_text())
    if isinstance(config, dict):
        config = BenchConfig.from_dict(config)
    report = BenchReport()
    for spec in config.instances:
        A = gen_instance(spec)
        k = config.k or spec.k
        opt = opt_bound(spec, k)
        for algo in config.algos:
            for seed in config.seeds:
                start = time.perf_counter()
                cost, words = run_cell(A, spec, algo, k, seed, config)
                elapsed = (time.perf_counter() - start) * 1e3
                ratio = cost / opt if 0 < opt < math.inf else None
                report.rows.append({
                    "instance": spec.label, "algo_tag": algo, "k": k, "seed": seed,
                    "cost_l1": float(cost), "opt_bound": float(opt) if math.isfinite(opt) else None,
                    "ratio": ratio, "elapsed_ms": elapsed if config.record_timing else None,
                    "comm_words": words,
                })
    return report


def separation_config(ns=(20, 40, 60, 80, 100), seeds=(0,), gamma=0.5, eps=0.25, k=3) -> BenchConfig:
    """The SVD-versus-sketching sweep on the heuristic counterexample."""
    specs = [InstanceSpec("heuristic-counterexample", n=n, k=k, gamma=gamma, eps=eps) for n in ns]
    return BenchConfig(instances=specs, algos=["svd", "polyklogd"], seeds=list(seeds))


def ratio_table(report: BenchReport) -> dict:
    """``{(instance, algo): median ratio over seeds}``."""
    groups: dict = {}
    for row in report.rows:
        if row["ratio"] is not None:
            groups.setdefault((row["instance"], row["algo_tag"]), []).append(row["ratio"])
    return {key: float(np.median(v)) for key, v in groups.items()}
