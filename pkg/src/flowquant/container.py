"""Binary container for compressed flow tables, plus size and entropy metrics.

Layout (all integers little-endian)::

    "FQZ1" | version u8 | codec u8 | gid_len u16 | gid utf-8
           | header_len u32 | header | payload_len u64 | payload

Bit 7 of the codec byte marks the entropic form: everything after the group
id is then a single gzip member wrapping the ``header_len .. payload`` run.
"""
from __future__ import annotations

import enum
import gzip
import struct
import zlib
from dataclasses import dataclass

import numpy as np

MAGIC = b"FQZ1"
FORMAT_VERSION = 1
DEFLATE_LEVEL = 6
_ENTROPIC_BIT = 0x80


class ContainerError(ValueError):
    pass


class CodecId(enum.IntEnum):
    RAW = 0
    SQ = 1
    PCA = 2
    PCA_SQ = 3
    VQ = 4


@dataclass(frozen=True)
class CompressedArtifact:
    codec_id: CodecId
    group_id: str
    header: bytes
    payload: bytes
    entropic: bool = True


def pack_bits(codes: np.ndarray, bits: int) -> bytes:
    """Pack an ``n x c`` matrix of codes column by column, LSB first.

    Each column starts on a byte boundary.
    """
    codes = np.asarray(codes, dtype=np.uint64)
    if codes.ndim == 1:
        codes = codes[:, None]
    if bits == 0 or codes.size == 0:
        if codes.size and codes.max() != 0:
            raise ContainerError("non-zero code with 0-bit width")
        return b""
    if bits < 64 and codes.max() >> np.uint64(bits):
        raise ContainerError(f"code does not fit in {bits} bits")
    if bits in (8, 16, 32, 64):
        dtype = np.dtype(f"<u{bits // 8}")
        return np.ascontiguousarray(codes.T).astype(dtype).tobytes()
    shifts = np.arange(bits, dtype=np.uint64)
    out = []
    for col in codes.T:
        bitplane = ((col[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
        out.append(np.packbits(bitplane.ravel(), bitorder="little").tobytes())
    return b"".join(out)


def packed_size(n: int, columns: int, bits: int) -> int:
    return columns * ((n * bits + 7) // 8)


def unpack_bits(buf: bytes, n: int, columns: int, bits: int) -> np.ndarray:
    if len(buf) != packed_size(n, columns, bits):
        raise ContainerError(
            f"payload holds {len(buf)} bytes, expected {packed_size(n, columns, bits)}")
    if bits == 0 or n == 0:
        return np.zeros((n, columns), dtype=np.uint64)
    if bits in (8, 16, 32, 64):
        dtype = np.dtype(f"<u{bits // 8}")
        return np.frombuffer(buf, dtype=dtype).reshape(columns, n).T.astype(np.uint64)
    stride = (n * bits + 7) // 8
    raw = np.frombuffer(buf, dtype=np.uint8).reshape(columns, stride)
    weights = np.uint64(1) << np.arange(bits, dtype=np.uint64)
    out = np.empty((n, columns), dtype=np.uint64)
    for j in range(columns):
        plane = np.unpackbits(raw[j], bitorder="little")[: n * bits].reshape(n, bits)
        out[:, j] = plane.astype(np.uint64) @ weights
    return out


def gzip_stage(data: bytes, level: int = DEFLATE_LEVEL) -> bytes:
    """Wrap ``data`` in one gzip member (mtime zeroed for reproducible sizes)."""
    return gzip.compress(data, compresslevel=level, mtime=0)


def gunzip(data: bytes) -> bytes:
    return gzip.decompress(data)


def serialize(artifact: CompressedArtifact) -> bytes:
    gid = artifact.group_id.encode("utf-8")
    if len(gid) > 0xFFFF:
        raise ContainerError("group id longer than 65535 bytes")
    if len(artifact.header) > 0xFFFFFFFF:
        raise ContainerError("header exceeds u32 length")
    if len(artifact.payload) >= 1 << 64:
        raise ContainerError("payload exceeds u64 length")
    codec = int(artifact.codec_id) | (_ENTROPIC_BIT if artifact.entropic else 0)
    body = b"".join([
        struct.pack("<I", len(artifact.header)), artifact.header,
        struct.pack("<Q", len(artifact.payload)), artifact.payload,
    ])
    if artifact.entropic:
        body = gzip_stage(body)
    return MAGIC + struct.pack("<BBH", FORMAT_VERSION, codec, len(gid)) + gid + body


def _parse_body(body: bytes) -> tuple[bytes, bytes, int]:
    if len(body) < 4:
        raise ContainerError("truncated header length")
    (hlen,) = struct.unpack_from("<I", body, 0)
    pos = 4 + hlen
    if len(body) < pos + 8:
        raise ContainerError("truncated header or payload length")
    header = body[4:pos]
    (plen,) = struct.unpack_from("<Q", body, pos)
    pos += 8
    if len(body) < pos + plen:
        raise ContainerError("declared payload length exceeds data")
    return header, body[pos:pos + plen], pos + plen


def deserialize_one(data: bytes) -> tuple[CompressedArtifact, int]:
    """Parse one container from the front of ``data``; return it and its byte length."""
    if data[:4] != MAGIC:
        raise ContainerError("bad magic")
    if len(data) < 8:
        raise ContainerError("truncated preamble")
    version, codec, gid_len = struct.unpack_from("<BBH", data, 4)
    if version != FORMAT_VERSION:
        raise ContainerError(f"unsupported format version {version}")
    entropic = bool(codec & _ENTROPIC_BIT)
    try:
        codec_id = CodecId(codec & ~_ENTROPIC_BIT)
    except ValueError:
        raise ContainerError(f"unknown codec id {codec & ~_ENTROPIC_BIT}") from None
    pos = 8 + gid_len
    if len(data) < pos:
        raise ContainerError("truncated group id")
    group_id = data[8:pos].decode("utf-8")
    if entropic:
        inflater = zlib.decompressobj(wbits=31)
        try:
            body = inflater.decompress(data[pos:])
        except zlib.error as exc:
            raise ContainerError(f"corrupt gzip body: {exc}") from None
        if not inflater.eof:
            raise ContainerError("truncated gzip body")
        header, payload, used = _parse_body(body)
        if used != len(body):
            raise ContainerError("gzip body longer than declared lengths")
        end = len(data) - len(inflater.unused_data)
    else:
        header, payload, used = _parse_body(data[pos:])
        end = pos + used
    return CompressedArtifact(codec_id, group_id, header, payload, entropic), end


def deserialize(data: bytes) -> CompressedArtifact:
    artifact, end = deserialize_one(data)
    if end != len(data):
        raise ContainerError(f"{len(data) - end} trailing bytes after container")
    return artifact


def deserialize_stream(data: bytes) -> list[CompressedArtifact]:
    """Split a concatenation of containers (one per group)."""
    out, pos = [], 0
    while pos < len(data):
        artifact, used = deserialize_one(data[pos:])
        out.append(artifact)
        pos += used
    return out


@dataclass(frozen=True)
class SizeReport:
    raw_bytes: int
    gz_bytes: int
    baseline_gz_bytes: int

    @property
    def ratio_pct(self) -> float:
        return compression_ratio(self.gz_bytes, self.baseline_gz_bytes)

    def __add__(self, other: "SizeReport") -> "SizeReport":
        return SizeReport(self.raw_bytes + other.raw_bytes, self.gz_bytes + other.gz_bytes,
                          self.baseline_gz_bytes + other.baseline_gz_bytes)


def compression_ratio(lossy_gz: int, baseline_gz: int) -> float:
    """Lossy+gzip size as a percentage of the gzip-only size; below 100 is a gain."""
    if baseline_gz <= 0:
        raise ValueError("baseline size must be positive")
    return 100.0 * lossy_gz / baseline_gz


_SYMBOL_VIEWS = {
    "float32": lambda x: np.asarray(x, dtype="<f4").view("<u4"),
    "float64": lambda x: np.asarray(x, dtype="<f8").view("<u8"),
    "codes": lambda x: np.asarray(x, dtype=np.uint64),
}


def entropy_estimate(data, mode: str = "float32") -> tuple[np.ndarray, float]:
    """Per-column empirical Shannon entropy in bits per symbol, and its median.

    Each column's serialized fixed-width values are the symbols: ``float32``
    and ``float64`` hash the IEEE bit patterns, ``codes`` uses integer codes.
    """
    if mode not in _SYMBOL_VIEWS:
        raise ValueError(f"unknown entropy mode {mode!r}")
    x = getattr(data, "numeric", data)
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise ValueError("entropy of an empty input")
    symbols = _SYMBOL_VIEWS[mode](x)
    per_column = np.empty(symbols.shape[1])
    for j in range(symbols.shape[1]):
        _, counts = np.unique(symbols[:, j], return_counts=True)
        p = counts / counts.sum()
        per_column[j] = max(0.0, float(-(p * np.log2(p)).sum()))
    return per_column, float(np.median(per_column))
