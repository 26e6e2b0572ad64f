"""Data-utility measurement: per-AS domain classification on decompressed flows."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .codecs import CodecConfig, GroupResult, baseline_gz_bytes, compress_group, decompress_group
from .container import SizeReport, deserialize, serialize
from .flow_model import FlowTable, SplitSpec, partition_by_group, split_by_client
from .forest import ForestConfig, ForestModel, train_forest

OTHER = "Other"


def relabel_rare(labels, min_class_flows: int, reference=None) -> np.ndarray:
    """Map classes seen fewer than ``min_class_flows`` times in ``reference`` to "Other".

    ``reference`` defaults to ``labels`` itself; pass the training labels to
    relabel a test split consistently.
    """
    labels = np.asarray(labels).astype(str)
    ref = labels if reference is None else np.asarray(reference).astype(str)
    classes, counts = np.unique(ref, return_counts=True)
    keep = set(classes[counts >= min_class_flows].tolist())
    return np.array([lab if lab in keep else OTHER for lab in labels], dtype=object)


def confusion_counts(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    """Confusion matrix over the union of true and predicted classes."""
    y_true = np.asarray(y_true).astype(str)
    y_pred = np.asarray(y_pred).astype(str)
    classes, inverse = np.unique(np.concatenate([y_true, y_pred]), return_inverse=True)
    t, p = inverse[: y_true.size], inverse[y_true.size:]
    matrix = np.zeros((classes.size, classes.size), dtype=np.int64)
    np.add.at(matrix, (t, p), 1)
    return classes, matrix


def f1_per_class(y_true, y_pred) -> dict[str, float]:
    """F1 for every class present in ``y_true``; 0 when precision + recall is 0."""
    classes, matrix = confusion_counts(y_true, y_pred)
    tp = np.diag(matrix).astype(float)
    fp = matrix.sum(axis=0) - tp
    fn = matrix.sum(axis=1) - tp
    present = set(np.unique(np.asarray(y_true).astype(str)).tolist())
    out = {}
    for c, t, f_p, f_n in zip(classes, tp, fp, fn):
        if c not in present:
            continue
        denom = 2 * t + f_p + f_n
        out[str(c)] = float(2 * t / denom) if denom > 0 else 0.0
    return out


@dataclass(frozen=True)
class F1Report:
    per_class: dict
    median: float
    p5: float
    p95: float

    @classmethod
    def from_scores(cls, per_class: dict) -> "F1Report":
        if not per_class:
            return cls({}, float("nan"), float("nan"), float("nan"))
        values = np.array(list(per_class.values()), dtype=float)
        p5, median, p95 = np.percentile(values, [5, 50, 95])
        return cls(dict(per_class), float(median), float(p5), float(p95))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["group", "class", "f1"])
        for (group, cls_), f1 in sorted(self.per_class.items()):
            writer.writerow([group, cls_, repr(f1)])
        writer.writerow(["*", "median", repr(self.median)])
        writer.writerow(["*", "p5", repr(self.p5)])
        writer.writerow(["*", "p95", repr(self.p95)])
        return buf.getvalue()


def evaluate(model: ForestModel, x: np.ndarray, labels, group: str = "") -> F1Report:
    """Per-class F1 of ``model`` on one test block, keyed by ``(group, class)``."""
    if len(labels) == 0:
        raise ValueError("empty test set")
    scores = f1_per_class(labels, model.predict(x))
    return F1Report.from_scores({(group, c): v for c, v in scores.items()})


@dataclass(frozen=True, eq=False)
class GroupOutcome:
    group: str
    n_train: int
    n_test: int
    baseline_gz: int
    compress_seconds: float
    result: GroupResult | None
    scores: dict


@dataclass(frozen=True, eq=False)
class UtilityResult:
    size: SizeReport | None
    f1: F1Report
    groups: list = field(default_factory=list)


def utility_pipeline(table: FlowTable, codec: CodecConfig | None, forest_cfg: ForestConfig = ForestConfig(),
                     split: SplitSpec = SplitSpec(), *, jobs: int = 1,
                     spectra: dict | None = None) -> UtilityResult:
    """Compress, decompress, train and score every AS group.

    The codec is fitted on each group's training rows only; both splits go
    through the container and back before the forest sees them. ``codec``
    set to ``None`` skips compression entirely (the uncompressed baseline).
    ``spectra`` caches PCA eigen-decompositions per group across calls.
    """
    train, test = split_by_client(table, split)
    train_parts = partition_by_group(train)
    test_parts = partition_by_group(test)
    names = table.column_names
    scores: dict = {}
    outcomes = []
    size = None

    for group, tr in train_parts.items():
        te = test_parts.get(group)
        x = tr.numeric if te is None else np.vstack([tr.numeric, te.numeric])
        fit_rows = np.arange(tr.n)
        result = None
        elapsed = 0.0
        base = 0
        if codec is None:
            recon = x
        else:
            spectrum = None
            if spectra is not None and codec.kind in ("pca", "pca_sq"):
                spectrum = spectra.get(group)
            t0 = time.perf_counter()
            result = compress_group(x, names, group, codec, fit_rows, jobs=jobs, spectrum=spectrum)
            blob = serialize(result.artifact)
            elapsed = time.perf_counter() - t0
            if spectra is not None and result.spectrum is not None:
                spectra[group] = result.spectrum
            recon, _ = decompress_group(deserialize(blob))
            base = baseline_gz_bytes(x, names, group)
            group_size = result.sizes(base)
            size = group_size if size is None else size + group_size

        group_scores = {}
        if te is not None:
            y_train = relabel_rare(tr.labels, forest_cfg.min_class_flows)
            y_test = relabel_rare(te.labels, forest_cfg.min_class_flows, reference=tr.labels)
            model = train_forest(recon[: tr.n], y_train, forest_cfg, jobs=jobs)
            report = evaluate(model, recon[tr.n:], y_test, group)
            group_scores = report.per_class
            scores.update(group_scores)
        outcomes.append(GroupOutcome(group, tr.n, 0 if te is None else te.n, base,
                                     elapsed, result, group_scores))

    return UtilityResult(size, F1Report.from_scores(scores), outcomes)
