"""Parameter sweeps for the three codec families, emitted as CSV rows.

Every sweep returns a list of dicts in a fixed column order. Time columns
are milliseconds on the monotonic clock; everything else is reproducible
given the table, grid, seeds and thread count.
"""
from __future__ import annotations

import csv
import io
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .codecs import CodecConfig, fit_normalization
from .container import entropy_estimate
from .flow_model import FlowTable, SplitSpec, partition_by_group, split_by_client
from .forest import ForestConfig
from .utility_eval import utility_pipeline
from . import vq_codec

SQ_COLUMNS = ("B", "ratio_pct", "f1_median", "f1_p5", "f1_p95", "wall_time")
PCA_COLUMNS = ("variance", "B", "ratio_pct", "f1_median", "entropy_median",
               "component_count_median")
VQ_COLUMNS = ("k_fraction", "subsample", "fit_time", "encode_time", "total_time",
              "ratio_pct", "f1_median")
TIME_COLUMNS = frozenset({"wall_time", "fit_time", "encode_time", "total_time"})


@dataclass(frozen=True)
class ExperimentGrid:
    sq_bits: tuple = (2, 4, 8, 16, 32)
    pca_variance: tuple = (0.99, 0.96, 0.8, 0.5)
    vq_k_fractions: tuple = (0.01, 0.05, 0.10, 0.20)
    vq_subsamples: tuple = (0.25, 0.50, 0.75, 1.0)

    def __post_init__(self):
        for b in self.sq_bits:
            if not 1 <= int(b) <= 32:
                raise ValueError(f"bit depth {b} outside [1, 32]")
        for v in self.pca_variance:
            if not 0.0 < v <= 1.0:
                raise ValueError(f"variance target {v} outside (0, 1]")
        for f in (*self.vq_k_fractions, *self.vq_subsamples):
            if not 0.0 < f <= 1.0:
                raise ValueError(f"fraction {f} outside (0, 1]")


def _ms(seconds: float) -> float:
    return round(1000.0 * seconds, 3)


def _warm_up(table: FlowTable, codec: CodecConfig | None, forest_cfg: ForestConfig,
             split: SplitSpec, jobs: int):
    # numba compiles on first call; keep that out of the timed runs
    small = table.take(np.arange(min(table.n, 400)))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            utility_pipeline(small, codec, ForestConfig(n_trees=2, seed=forest_cfg.seed,
                                                        min_class_flows=1), split, jobs=jobs)
    except ValueError:
        # a slice too small for the codec still compiled what it reached
        pass


def run_sq_sweep(table: FlowTable, grid: ExperimentGrid = ExperimentGrid(),
                 forest_cfg: ForestConfig = ForestConfig(), split: SplitSpec = SplitSpec(),
                 *, jobs: int = 1, seed: int = 0) -> list[dict]:
    """One row per bit depth plus a ``B=none`` row for the uncompressed baseline."""
    _warm_up(table, CodecConfig("sq", bits=2, seed=seed), forest_cfg, split, jobs)
    rows = []
    t0 = time.perf_counter()
    base = utility_pipeline(table, None, forest_cfg, split, jobs=jobs)
    rows.append({"B": "none", "ratio_pct": 100.0, "f1_median": base.f1.median,
                 "f1_p5": base.f1.p5, "f1_p95": base.f1.p95,
                 "wall_time": _ms(time.perf_counter() - t0)})
    for bits in sorted({int(b) for b in grid.sq_bits}):
        t0 = time.perf_counter()
        res = utility_pipeline(table, CodecConfig("sq", bits=bits, seed=seed), forest_cfg, split,
                               jobs=jobs)
        rows.append({"B": bits, "ratio_pct": res.size.ratio_pct, "f1_median": res.f1.median,
                     "f1_p5": res.f1.p5, "f1_p95": res.f1.p95,
                     "wall_time": _ms(time.perf_counter() - t0)})
    return rows


def _stored_entropies(res) -> np.ndarray:
    parts = []
    for g in res.groups:
        mode = g.result.stored_mode
        parts.append(entropy_estimate(g.result.stored, mode)[0])
    return np.concatenate(parts)


def original_entropy(table: FlowTable) -> float:
    """Median per-column entropy of the float32 records, pooled over groups."""
    per = [entropy_estimate(part.numeric, "float32")[0]
           for part in partition_by_group(table).values()]
    return float(np.median(np.concatenate(per)))


def run_pca_grid(table: FlowTable, grid: ExperimentGrid = ExperimentGrid(),
                 forest_cfg: ForestConfig = ForestConfig(), split: SplitSpec = SplitSpec(),
                 *, jobs: int = 1, seed: int = 0) -> list[dict]:
    """Rows per (variance, B). ``B=32`` stores float32 coordinates without
    scalar quantization; smaller B quantizes the coordinates.

    The ``variance=none`` row describes the untouched data.
    """
    _warm_up(table, CodecConfig("pca", variance=0.9), forest_cfg, split, jobs)
    base = utility_pipeline(table, None, forest_cfg, split, jobs=jobs)
    rows = [{"variance": "none", "B": "none", "ratio_pct": 100.0, "f1_median": base.f1.median,
             "entropy_median": original_entropy(table),
             "component_count_median": float(table.d)}]
    spectra: dict = {}
    for variance in sorted(set(grid.pca_variance)):
        for bits in sorted({int(b) for b in grid.sq_bits}):
            if bits == 32:
                codec = CodecConfig("pca", variance=variance, float32=True, seed=seed)
            else:
                codec = CodecConfig("pca_sq", variance=variance, bits=bits, seed=seed)
            res = utility_pipeline(table, codec, forest_cfg, split, jobs=jobs, spectra=spectra)
            counts = [g.result.n_components for g in res.groups]
            rows.append({"variance": variance, "B": bits, "ratio_pct": res.size.ratio_pct,
                         "f1_median": res.f1.median,
                         "entropy_median": float(np.median(_stored_entropies(res))),
                         "component_count_median": float(np.median(counts))})
    return rows


def time_vq_fit(table: FlowTable, codec: CodecConfig, split: SplitSpec = SplitSpec(),
                repeats: int = 1, jobs: int = 1) -> float:
    """Best-of-``repeats`` codebook fit time in seconds, summed over groups.

    Fits on the same normalized training rows the pipeline uses.
    """
    train, _ = split_by_client(table, split)
    blocks = []
    for part in partition_by_group(train).values():
        norm = fit_normalization(part.numeric)
        blocks.append(np.ascontiguousarray((part.numeric - norm.center) / norm.scale))
    cfg = codec.vq_config()
    best = np.inf
    for _ in range(max(1, repeats)):
        total = 0.0
        for y in blocks:
            t0 = time.perf_counter()
            vq_codec.fit(y, cfg, jobs=jobs)
            total += time.perf_counter() - t0
        best = min(best, total)
    return best


def run_vq_sweep(table: FlowTable, grid: ExperimentGrid = ExperimentGrid(),
                 forest_cfg: ForestConfig = ForestConfig(), split: SplitSpec = SplitSpec(),
                 *, jobs: int = 1, seed: int = 0, timing_repeats: int = 1) -> list[dict]:
    """Rows per (k_fraction, subsample).

    ``timing_repeats > 1`` refits each codebook that many extra times and
    reports the fastest fit, which steadies the timing columns.
    """
    _warm_up(table, CodecConfig("vq", k_fraction=0.05, seed=seed), forest_cfg, split, jobs)
    rows = []
    for k in sorted(set(grid.vq_k_fractions)):
        for sub in sorted(set(grid.vq_subsamples)):
            codec = CodecConfig("vq", k_fraction=k, subsample=sub, seed=seed)
            t0 = time.perf_counter()
            res = utility_pipeline(table, codec, forest_cfg, split, jobs=jobs)
            total = time.perf_counter() - t0
            fit = sum(g.result.fit_seconds for g in res.groups)
            if timing_repeats > 1:
                fit = min(fit, time_vq_fit(table, codec, split, timing_repeats - 1, jobs))
            rows.append({"k_fraction": k, "subsample": sub, "fit_time": _ms(fit),
                         "encode_time": _ms(sum(g.result.encode_seconds for g in res.groups)),
                         "total_time": _ms(total), "ratio_pct": res.size.ratio_pct,
                         "f1_median": res.f1.median})
    return rows


def rows_to_csv(rows: list[dict], columns, drop_time: bool = False) -> str:
    cols = [c for c in columns if not (drop_time and c in TIME_COLUMNS)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in (row[c] for c in cols)])
    return buf.getvalue()

