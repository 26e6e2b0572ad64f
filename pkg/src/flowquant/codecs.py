"""Per-group compress/decompress: normalization, a lossy stage, container framing.

Header layout (little-endian), shared by every codec::

    flags u8 | deflate level u8 | n u64 | d u32 | d x (u16 len + utf-8 name)
    [center d x f64 | scale d x f64]            if FLAG_NORMALIZED
    codec block

Codec blocks:

* RAW: empty; payload is the record-major value matrix, one flow after
  another as an exporter writes them (f32 when FLAG_F32).
* SQ: d x (p_low f64, p_high f64) | bits u8; payload is packed codes.
* PCA: m u32 | d u32 | mean | components (m x d) | eigenvalues (m) |
  variance target, retained, total f64 | degenerate u8; payload is
  column-major coordinates (f32 when FLAG_F32).
* PCA_SQ: PCA block followed by an SQ block over the m coordinates.
* VQ: K u32 | d u32 | centroids (K x d f64); payload is one column of
  ceil(log2 K)-bit indices.
"""
from __future__ import annotations

import io
import struct
import time
from dataclasses import dataclass, replace

import numpy as np

from . import pca_codec, scalar_quantizer as sq, vq_codec
from .container import (DEFLATE_LEVEL, CodecId, CompressedArtifact, ContainerError,
                        SizeReport, pack_bits, serialize, unpack_bits)
from .flow_model import NormalizationParams, fit_normalization

FLAG_NORMALIZED = 0x01
FLAG_F32 = 0x02
FLAG_PER_GROUP_NORM = 0x04

_KINDS = {"raw": CodecId.RAW, "sq": CodecId.SQ, "pca": CodecId.PCA,
          "pca_sq": CodecId.PCA_SQ, "vq": CodecId.VQ}


@dataclass(frozen=True)
class CodecConfig:
    """What to do to each group's numeric block.

    ``float32`` selects 32-bit storage for RAW values and PCA coordinates.
    """

    kind: str = "sq"
    bits: int = 8
    variance: float = 0.99
    float32: bool = False
    k_fraction: float = 0.05
    subsample: float = 1.0
    seed: int = 0
    max_iter: int = 100
    rel_tol: float = 1e-4

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown codec kind {self.kind!r}; pick one of {sorted(_KINDS)}")
        if self.kind in ("sq", "pca_sq") and not 1 <= self.bits <= 32:
            raise ValueError("bits must be in [1, 32]")
        if self.kind in ("pca", "pca_sq") and not 0.0 < self.variance <= 1.0:
            raise ValueError("variance must lie in (0, 1]")
        if self.kind == "vq":
            self.vq_config()

    @property
    def codec_id(self) -> CodecId:
        return _KINDS[self.kind]

    def vq_config(self) -> vq_codec.VqFitConfig:
        return vq_codec.VqFitConfig(self.k_fraction, self.subsample, self.seed,
                                    self.max_iter, self.rel_tol)


RAW_F32 = CodecConfig(kind="raw", float32=True)


@dataclass(frozen=True, eq=False)
class GroupResult:
    """A compressed group plus the bookkeeping benchmarks need."""

    artifact: CompressedArtifact
    fit_seconds: float
    encode_seconds: float
    stored: np.ndarray
    stored_mode: str
    n_components: int | None = None
    codebook: vq_codec.Codebook | None = None
    spectrum: pca_codec.PcaSpectrum | None = None

    def sizes(self, baseline_gz: int) -> SizeReport:
        raw = len(serialize(replace(self.artifact, entropic=False)))
        return SizeReport(raw, len(serialize(self.artifact)), baseline_gz)


class _Writer:
    def __init__(self):
        self.buf = io.BytesIO()

    def pack(self, fmt: str, *values):
        self.buf.write(struct.pack("<" + fmt, *values))

    def array(self, a: np.ndarray, dtype: str = "<f8"):
        self.buf.write(np.ascontiguousarray(a, dtype=dtype).tobytes())

    def getvalue(self) -> bytes:
        return self.buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ContainerError("header truncated")
        values = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return values if len(values) > 1 else values[0]

    def array(self, count: int, dtype: str = "<f8") -> np.ndarray:
        size = count * np.dtype(dtype).itemsize
        if self.pos + size > len(self.data):
            raise ContainerError("header truncated")
        out = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.pos)
        self.pos += size
        return out.astype(np.float64)


def _write_common(w: _Writer, flags: int, n: int, names, norm: NormalizationParams | None):
    w.pack("BBQI", flags, DEFLATE_LEVEL, n, len(names))
    for name in names:
        raw = name.encode("utf-8")
        w.pack("H", len(raw))
        w.buf.write(raw)
    if norm is not None:
        w.array(norm.center)
        w.array(norm.scale)


def _write_sq(w: _Writer, params: sq.ScalarQuantParams):
    w.array(np.column_stack([params.p_low, params.p_high]).ravel())
    w.pack("B", params.bits)


def _read_sq(r: _Reader, d: int) -> sq.ScalarQuantParams:
    pairs = r.array(2 * d).reshape(d, 2)
    bits = r.unpack("B")
    return sq.ScalarQuantParams(pairs[:, 0].copy(), pairs[:, 1].copy(), bits)


def _write_pca(w: _Writer, model: pca_codec.PcaModel):
    w.pack("II", model.m, model.d)
    w.array(model.mean)
    w.array(model.components)
    w.array(model.eigenvalues)
    w.pack("dddB", model.variance_target, model.variance_retained,
           model.total_variance, int(model.degenerate))


def _read_pca(r: _Reader) -> pca_codec.PcaModel:
    m, d = r.unpack("II")
    mean = r.array(d)
    components = r.array(m * d).reshape(m, d)
    eigenvalues = r.array(m)
    target, retained, total, degenerate = r.unpack("dddB")
    return pca_codec.PcaModel(mean, components, eigenvalues, target, retained, total,
                              bool(degenerate))


def _records_bytes(x: np.ndarray, float32: bool) -> bytes:
    return np.ascontiguousarray(x, dtype="<f4" if float32 else "<f8").tobytes()


def _records_from(buf: bytes, n: int, d: int, float32: bool) -> np.ndarray:
    return _columns_from(buf, n, d, float32, records=True)


def _columns_bytes(x: np.ndarray, float32: bool) -> bytes:
    return np.ascontiguousarray(x.T, dtype="<f4" if float32 else "<f8").tobytes()


def _columns_from(buf: bytes, n: int, d: int, float32: bool, records: bool = False) -> np.ndarray:
    dtype = "<f4" if float32 else "<f8"
    expected = n * d * np.dtype(dtype).itemsize
    if len(buf) != expected:
        raise ContainerError(f"payload holds {len(buf)} bytes, expected {expected}")
    flat = np.frombuffer(buf, dtype=dtype)
    out = flat.reshape(n, d) if records else flat.reshape(d, n).T
    return out.astype(np.float64)


def compress_group(x: np.ndarray, column_names, group_id: str, config: CodecConfig,
                   fit_rows: np.ndarray | None = None, *, jobs: int = 1,
                   spectrum: pca_codec.PcaSpectrum | None = None) -> GroupResult:
    """Compress one group's ``n x d`` block.

    Every fitted quantity (normalization, percentiles, PCA basis, codebook)
    is estimated on ``fit_rows`` only; all rows are encoded. ``spectrum``
    lets a caller reuse one eigen-decomposition of the normalized fit rows
    across several variance targets.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    names = tuple(column_names)
    if len(names) != d:
        raise ValueError(f"{len(names)} names for {d} columns")
    fit_idx = np.arange(n) if fit_rows is None else np.asarray(fit_rows)
    w = _Writer()
    kind = config.kind

    if kind == "raw":
        t0 = time.perf_counter()
        payload = _records_bytes(x, config.float32)
        stored = x.astype(np.float32) if config.float32 else x
        flags = FLAG_F32 if config.float32 else 0
        _write_common(w, flags, n, names, None)
        artifact = CompressedArtifact(CodecId.RAW, group_id, w.getvalue(), payload)
        return GroupResult(artifact, 0.0, time.perf_counter() - t0, stored,
                           "float32" if config.float32 else "float64")

    t0 = time.perf_counter()
    norm = fit_normalization(x[fit_idx])
    y = (x - norm.center) / norm.scale
    flags = FLAG_NORMALIZED | FLAG_PER_GROUP_NORM
    n_components = None
    codebook = None
    spec = None

    if kind == "sq":
        params = sq.fit(y[fit_idx], config.bits)
        t1 = time.perf_counter()
        codes = sq.quantize(y, params).codes
        _write_common(w, flags, n, names, norm)
        _write_sq(w, params)
        payload = pack_bits(codes, config.bits)
        stored, mode = codes, "codes"
    elif kind in ("pca", "pca_sq"):
        spec = spectrum if spectrum is not None else pca_codec.spectrum(y[fit_idx])
        model = spec.select(config.variance)
        n_components = model.m
        if kind == "pca":
            t1 = time.perf_counter()
            coords = pca_codec.encode(y, model).coords
            if config.float32:
                flags |= FLAG_F32
            _write_common(w, flags, n, names, norm)
            _write_pca(w, model)
            payload = _columns_bytes(coords, config.float32)
            stored = coords.astype(np.float32) if config.float32 else coords
            mode = "float32" if config.float32 else "float64"
        else:
            coords_fit = pca_codec.encode(y[fit_idx], model).coords
            params = sq.fit(coords_fit, config.bits)
            t1 = time.perf_counter()
            codes = sq.quantize(pca_codec.encode(y, model).coords, params).codes
            _write_common(w, flags, n, names, norm)
            _write_pca(w, model)
            _write_sq(w, params)
            payload = pack_bits(codes, config.bits)
            stored, mode = codes, "codes"
    else:
        codebook = vq_codec.fit(y[fit_idx], config.vq_config(), jobs=jobs)
        t1 = time.perf_counter()
        idx = vq_codec.encode(y, codebook, jobs=jobs).indices
        _write_common(w, flags, n, names, norm)
        w.pack("II", codebook.k, codebook.d)
        w.array(codebook.centroids)
        payload = pack_bits(idx, codebook.index_bits)
        stored, mode = idx[:, None], "codes"

    artifact = CompressedArtifact(config.codec_id, group_id, w.getvalue(), payload)
    t2 = time.perf_counter()
    return GroupResult(artifact, t1 - t0, t2 - t1, stored, mode, n_components, codebook, spec)


def decompress_group(artifact: CompressedArtifact) -> tuple[np.ndarray, tuple[str, ...]]:
    """Rebuild the ``n x d`` block (in original units) and its column names."""
    r = _Reader(artifact.header)
    flags, _level, n, d = r.unpack("BBQI")
    names = []
    for _ in range(d):
        length = r.unpack("H")
        names.append(r.data[r.pos:r.pos + length].decode("utf-8"))
        r.pos += length
    norm = None
    if flags & FLAG_NORMALIZED:
        norm = NormalizationParams(r.array(d), r.array(d))
    f32 = bool(flags & FLAG_F32)
    codec = artifact.codec_id
    payload = artifact.payload

    if codec == CodecId.RAW:
        y = _records_from(payload, n, d, f32)
    elif codec == CodecId.SQ:
        params = _read_sq(r, d)
        y = sq.dequantize(unpack_bits(payload, n, d, params.bits), params)
    elif codec == CodecId.PCA:
        model = _read_pca(r)
        y = pca_codec.decode(_columns_from(payload, n, model.m, f32), model)
    elif codec == CodecId.PCA_SQ:
        model = _read_pca(r)
        params = _read_sq(r, model.m)
        coords = sq.dequantize(unpack_bits(payload, n, model.m, params.bits), params)
        y = pca_codec.decode(coords, model)
    else:
        k, dk = r.unpack("II")
        centroids = r.array(k * dk).reshape(k, dk)
        cb = vq_codec.Codebook(centroids, 0.0, 0, 0)
        idx = unpack_bits(payload, n, 1, cb.index_bits)[:, 0]
        y = vq_codec.decode(idx, cb)
    if r.pos != len(artifact.header):
        raise ContainerError("unparsed bytes at end of header")
    if norm is not None:
        y = y * norm.scale + norm.center
    return y, tuple(names)


def baseline_gz_bytes(x: np.ndarray, column_names, group_id: str) -> int:
    """Size of the group stored as gzipped float32 records: the ratio denominator."""
    return len(serialize(compress_group(x, column_names, group_id, RAW_F32).artifact))
