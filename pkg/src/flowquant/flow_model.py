"""Columnar flow-record tables: ingestion, normalization, grouping and splitting.

Every codec in the package consumes a :class:`FlowTable`. The table is a
read-only bundle of an ``n x d`` float64 matrix of flow metrics plus three
per-row metadata columns (domain label, AS/group key, client id).
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


class FlowDataError(ValueError):
    """Raised when input data violates the table contract."""


@dataclass(frozen=True)
class Schema:
    """Column-role mapping for CSV ingestion.

    ``numeric`` set to ``None`` means "every column not used as metadata".
    """

    label: str = "label"
    group: str = "group"
    client: str = "client"
    numeric: tuple[str, ...] | None = None

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "Schema":
        numeric = mapping.get("numeric")
        if isinstance(numeric, str):
            numeric = None if numeric.strip() in ("", "*") else tuple(
                c.strip() for c in numeric.split(",") if c.strip())
        elif numeric is not None:
            numeric = tuple(numeric)
        return cls(label=str(mapping.get("label", "label")),
                   group=str(mapping.get("group", "group")),
                   client=str(mapping.get("client", "client")),
                   numeric=numeric)


def read_schema_file(path: str | os.PathLike) -> Schema:
    """Parse a ``key=value`` schema file (``#`` starts a comment)."""
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FlowDataError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()
    unknown = set(entries) - {"label", "group", "client", "numeric"}
    if unknown:
        raise FlowDataError(f"unknown schema keys: {sorted(unknown)}")
    return Schema.from_mapping(entries)


def _as_str_array(values: Sequence[str] | np.ndarray) -> np.ndarray:
    return np.asarray([str(v) for v in values], dtype=object)


@dataclass(frozen=True, eq=False)
class FlowTable:
    column_names: tuple[str, ...]
    numeric: np.ndarray
    labels: np.ndarray
    group_key: np.ndarray
    client_id: np.ndarray
    dropped_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        numeric = np.array(self.numeric, dtype=np.float64, copy=True)
        if numeric.ndim != 2:
            raise FlowDataError("numeric block must be a 2-D matrix")
        n, d = numeric.shape
        if n < 1 or d < 1:
            raise FlowDataError(f"table must have n >= 1 and d >= 1, got {n}x{d}")
        if not np.isfinite(numeric).all():
            raise FlowDataError("numeric block contains NaN or Inf")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != d:
            raise FlowDataError(f"{len(names)} column names for {d} columns")
        if len(set(names)) != d:
            raise FlowDataError("column names must be unique")
        numeric.setflags(write=False)
        object.__setattr__(self, "numeric", numeric)
        object.__setattr__(self, "column_names", names)
        for attr in ("labels", "group_key", "client_id"):
            col = _as_str_array(getattr(self, attr))
            if col.shape != (n,):
                raise FlowDataError(f"{attr} has {col.shape[0]} entries, expected {n}")
            col.setflags(write=False)
            object.__setattr__(self, attr, col)

    @property
    def n(self) -> int:
        return self.numeric.shape[0]

    @property
    def d(self) -> int:
        return self.numeric.shape[1]

    def take(self, rows) -> "FlowTable":
        rows = np.asarray(rows)
        return FlowTable(self.column_names, self.numeric[rows], self.labels[rows],
                         self.group_key[rows], self.client_id[rows])

    def with_numeric(self, numeric: np.ndarray) -> "FlowTable":
        """Same metadata, new numeric block (same shape)."""
        numeric = np.asarray(numeric, dtype=np.float64)
        if numeric.shape != self.numeric.shape:
            raise FlowDataError(
                f"replacement block {numeric.shape} != {self.numeric.shape}")
        return FlowTable(self.column_names, numeric, self.labels,
                         self.group_key, self.client_id)

    @staticmethod
    def concat(tables: Sequence["FlowTable"]) -> "FlowTable":
        if not tables:
            raise FlowDataError("nothing to concatenate")
        names = tables[0].column_names
        if any(t.column_names != names for t in tables):
            raise FlowDataError("column layouts differ")
        return FlowTable(
            names,
            np.vstack([t.numeric for t in tables]),
            np.concatenate([t.labels for t in tables]),
            np.concatenate([t.group_key for t in tables]),
            np.concatenate([t.client_id for t in tables]),
        )


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        scale = np.asarray(self.scale, dtype=np.float64)
        if center.shape != scale.shape or center.ndim != 1:
            raise FlowDataError("center and scale must be equal-length vectors")
        if not (scale > 0).all():
            raise FlowDataError("scale entries must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "scale", scale)

    @property
    def d(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise FlowDataError("train_fraction must lie in (0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise FlowDataError("seed must be an unsigned 64-bit integer")


def load_csv(path: str | os.PathLike, schema: Schema | Mapping[str, object] | None = None) -> FlowTable:
    """Read a header-first UTF-8 CSV into a :class:`FlowTable`.

    Rows whose numeric cells do not parse as finite reals are dropped; the
    count is kept in ``FlowTable.dropped_rows``.
    """
    if schema is None:
        schema = Schema()
    elif not isinstance(schema, Schema):
        schema = Schema.from_mapping(schema)
    if not os.path.isfile(path):
        raise FlowDataError(f"no such file: {path}")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FlowDataError(f"{path}: missing header row") from None
        index = {name: i for i, name in enumerate(header)}
        meta = (schema.label, schema.group, schema.client)
        numeric_cols = schema.numeric
        if numeric_cols is None:
            numeric_cols = tuple(h for h in header if h not in meta)
        missing = [c for c in (*meta, *numeric_cols) if c not in index]
        if missing:
            raise FlowDataError(f"schema names columns absent from header: {missing}")
        if not numeric_cols:
            raise FlowDataError("schema selects no numeric columns")

        num_idx = [index[c] for c in numeric_cols]
        meta_idx = [index[c] for c in meta]
        rows, labels, groups, clients = [], [], [], []
        dropped = 0
        for record in reader:
            if not record:
                continue
            try:
                values = [float(record[i]) for i in num_idx]
                lab, grp, cli = (record[i] for i in meta_idx)
            except (ValueError, IndexError):
                dropped += 1
                continue
            if not all(math.isfinite(v) for v in values):
                dropped += 1
                continue
            rows.append(values)
            labels.append(lab)
            groups.append(grp)
            clients.append(cli)

    if not rows:
        raise FlowDataError("zero surviving rows")
    return FlowTable(numeric_cols, np.array(rows, dtype=np.float64), labels,
                     groups, clients, dropped_rows=dropped)


def write_csv(table: FlowTable, path: str | os.PathLike, schema: Schema | None = None) -> None:
    schema = schema or Schema()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([schema.label, schema.group, schema.client, *table.column_names])
        for i in range(table.n):
            writer.writerow([table.labels[i], table.group_key[i], table.client_id[i],
                             *(repr(float(v)) for v in table.numeric[i])])


def fit_normalization(numeric: np.ndarray) -> NormalizationParams:
    numeric = np.asarray(numeric, dtype=np.float64)
    if numeric.ndim != 2 or numeric.shape[0] < 1:
        raise FlowDataError("cannot fit normalization on an empty matrix")
    center = np.median(numeric, axis=0)
    scale = numeric.std(axis=0)
    # constant column: unit scale keeps the inverse exact
    scale[scale == 0] = 1.0
    return NormalizationParams(center, scale)


def normalize(table: FlowTable, params: NormalizationParams | None = None
              ) -> tuple[FlowTable, NormalizationParams]:
    """Center each column on its median and divide by its population std.

    When ``params`` is given they are applied as-is (used to push test rows
    through statistics fitted on the training rows).
    """
    if params is None:
        params = fit_normalization(table.numeric)
    elif params.d != table.d:
        raise FlowDataError(f"params cover {params.d} columns, table has {table.d}")
    return table.with_numeric((table.numeric - params.center) / params.scale), params


def denormalize(table: FlowTable, params: NormalizationParams) -> FlowTable:
    if params.d != table.d:
        raise FlowDataError(f"params cover {params.d} columns, table has {table.d}")
    return table.with_numeric(table.numeric * params.scale + params.center)


def partition_by_group(table: FlowTable) -> dict[str, FlowTable]:
    """Split rows by group key; keys come back sorted, row order is kept."""
    keys, inverse = np.unique(table.group_key.astype(str), return_inverse=True)
    return {str(k): table.take(np.flatnonzero(inverse == i)) for i, k in enumerate(keys)}


def split_by_client(table: FlowTable, spec: SplitSpec) -> tuple[FlowTable, FlowTable]:
    """Seeded client-level train/test split; a client's rows never straddle sides."""
    clients, inverse = np.unique(table.client_id.astype(str), return_inverse=True)
    if clients.size < 2:
        raise FlowDataError("need at least 2 distinct clients to split")
    order = np.random.default_rng(int(spec.seed)).permutation(clients.size)
    n_train = math.ceil(spec.train_fraction * clients.size)
    n_train = min(max(n_train, 1), clients.size - 1)
    in_train = np.zeros(clients.size, dtype=bool)
    in_train[order[:n_train]] = True
    mask = in_train[inverse]
    return table.take(np.flatnonzero(mask)), table.take(np.flatnonzero(~mask))
