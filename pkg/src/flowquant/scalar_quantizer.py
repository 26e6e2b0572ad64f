"""Per-column B-bit uniform scalar quantization with percentile clamping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow_model import FlowTable


@dataclass(frozen=True, eq=False)
class ScalarQuantParams:
    p_low: np.ndarray
    p_high: np.ndarray
    bits: int

    def __post_init__(self):
        lo = np.asarray(self.p_low, dtype=np.float64)
        hi = np.asarray(self.p_high, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("p_low and p_high must be equal-length vectors")
        if not 1 <= int(self.bits) <= 32:
            raise ValueError(f"bits must be in [1, 32], got {self.bits}")
        if (lo > hi).any():
            raise ValueError("p_low must not exceed p_high")
        object.__setattr__(self, "p_low", lo)
        object.__setattr__(self, "p_high", hi)
        object.__setattr__(self, "bits", int(self.bits))

    @property
    def d(self) -> int:
        return self.p_low.shape[0]

    @property
    def levels(self) -> int:
        """Largest code, ``2**bits - 1``."""
        return (1 << self.bits) - 1

    @property
    def degenerate(self) -> np.ndarray:
        return self.p_low == self.p_high

    @property
    def step(self) -> np.ndarray:
        return (self.p_high - self.p_low) / self.levels


@dataclass(frozen=True, eq=False)
class CodeMatrix:
    codes: np.ndarray
    bits: int

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 2:
            raise ValueError("codes must be a 2-D matrix")
        if codes.size and int(codes.max()) > (1 << int(self.bits)) - 1:
            raise ValueError(f"code exceeds {self.bits}-bit range")
        object.__setattr__(self, "codes", codes.astype(np.uint64, copy=False))


def _matrix(data) -> np.ndarray:
    if isinstance(data, FlowTable):
        return data.numeric
    x = np.asarray(data, dtype=np.float64)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def fit(data, bits: int, low_pct: float = 1.0, high_pct: float = 99.0) -> ScalarQuantParams:
    """Fit per-column clamp bounds at the given percentiles.

    Percentiles use linear interpolation between order statistics.
    """
    if not 0.0 <= low_pct < high_pct <= 100.0:
        raise ValueError("need 0 <= low_pct < high_pct <= 100")
    if not 1 <= int(bits) <= 32:
        raise ValueError(f"bits must be in [1, 32], got {bits}")
    x = _matrix(data)
    if x.shape[0] == 0:
        raise ValueError("cannot fit on an empty table")
    lo, hi = np.percentile(x, [low_pct, high_pct], axis=0, method="linear")
    # interpolation can leave hi a rounding error below lo on near-constant columns
    hi = np.maximum(hi, lo)
    return ScalarQuantParams(lo, hi, bits)


def quantize(data, params: ScalarQuantParams) -> CodeMatrix:
    x = _matrix(data)
    if x.shape[1] != params.d:
        raise ValueError(f"params cover {params.d} columns, data has {x.shape[1]}")
    lo, hi = params.p_low, params.p_high
    span = np.where(params.degenerate, 1.0, hi - lo)
    t = (np.clip(x, lo, hi) - lo) / span * float(params.levels)
    # np.rint rounds half to even
    codes = np.clip(np.rint(t), 0, params.levels).astype(np.uint64)
    codes[:, params.degenerate] = 0
    return CodeMatrix(codes, params.bits)


def dequantize(codes: CodeMatrix | np.ndarray, params: ScalarQuantParams) -> np.ndarray:
    c = codes.codes if isinstance(codes, CodeMatrix) else np.asarray(codes)
    if c.ndim != 2 or c.shape[1] != params.d:
        raise ValueError(f"params cover {params.d} columns, codes have shape {c.shape}")
    if c.size and int(c.max()) > params.levels:
        raise ValueError(f"code >= 2**{params.bits}")
    lo, hi = params.p_low, params.p_high
    x = c.astype(np.float64) / float(params.levels) * (hi - lo) + lo
    return np.where(params.degenerate, lo, np.clip(x, lo, hi))
