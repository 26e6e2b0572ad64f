"""PCA as a lossy codec: fit, encode to component coordinates, decode.

The symmetric eigensolver is a cyclic Jacobi rotation scheme; it is fast
enough for the ~175-column covariance matrices flow records produce and has
no dependence on LAPACK's driver choice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import scalar_quantizer as sq

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


@numba.njit(cache=True)
def _jacobi_sweeps(a, v, tol, max_sweeps):
    d = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(d):
            for q in range(p + 1, d):
                off += 2.0 * a[p, q] * a[p, q]
        if np.sqrt(off) < tol:
            return sweep
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(d):
                    if r != p and r != q:
                        g = a[r, p]
                        h = a[r, q]
                        a[r, p] = g - s * (h + g * tau)
                        a[r, q] = h + s * (g - h * tau)
                        a[p, r] = a[r, p]
                        a[q, r] = a[r, q]
                for r in range(d):
                    g = v[r, p]
                    h = v[r, q]
                    v[r, p] = g - s * (h + g * tau)
                    v[r, q] = h + s * (g - h * tau)
    return max_sweeps


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(vectors.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def eig_sym(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a symmetric matrix.

    Returns
    -------
    eigenvalues : (d,) array, descending
    eigenvectors : (d, d) array, one orthonormal eigenvector per row
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("eig_sym needs a square matrix")
    if not np.isfinite(a).all():
        raise ValueError("matrix has non-finite entries")
    work = np.ascontiguousarray(0.5 * (a + a.T))
    d = work.shape[0]
    norm = np.linalg.norm(work)
    v = np.eye(d)
    if norm > 0:
        _jacobi_sweeps(work, v, JACOBI_TOL * norm, JACOBI_MAX_SWEEPS)
    vals = np.diag(work).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], _fix_signs(v[:, order].T)


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    variance_target: float
    variance_retained: float
    total_variance: float
    degenerate: bool = False

    @property
    def m(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]


@dataclass(frozen=True, eq=False)
class PcaEncoded:
    coords: np.ndarray


@dataclass(frozen=True, eq=False)
class PcaSpectrum:
    """Full eigen-decomposition of one data set, reusable across variance targets."""

    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def select(self, variance_target: float) -> PcaModel:
        if not 0.0 < variance_target <= 1.0:
            raise ValueError("variance_target must lie in (0, 1]")
        d = self.eigenvalues.shape[0]
        total = float(self.eigenvalues.sum())
        if total <= 0.0:
            return PcaModel(self.mean, self.eigenvectors[:1].copy(), np.zeros(1),
                            variance_target, 1.0, 0.0, degenerate=True)
        ratio = np.cumsum(self.eigenvalues) / total
        hits = np.flatnonzero(ratio >= variance_target)
        m = int(hits[0]) + 1 if hits.size else d
        return PcaModel(self.mean, self.eigenvectors[:m].copy(), self.eigenvalues[:m].copy(),
                        variance_target, float(ratio[m - 1]), total)


def spectrum(x: np.ndarray) -> PcaSpectrum:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("PCA needs at least 2 rows")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    vals, vecs = eig_sym(cov)
    return PcaSpectrum(mean, np.maximum(vals, 0.0), vecs)


def fit(x: np.ndarray, variance_target: float) -> PcaModel:
    """Keep the fewest components whose eigenvalue mass reaches ``variance_target``."""
    if not 0.0 < variance_target <= 1.0:
        raise ValueError("variance_target must lie in (0, 1]")
    return spectrum(x).select(variance_target)


def encode(x: np.ndarray, model: PcaModel) -> PcaEncoded:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise ValueError(f"model expects {model.d} columns, got shape {x.shape}")
    return PcaEncoded((x - model.mean) @ model.components.T)


def decode(enc: PcaEncoded | np.ndarray, model: PcaModel) -> np.ndarray:
    coords = enc.coords if isinstance(enc, PcaEncoded) else np.asarray(enc, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != model.m:
        raise ValueError(f"model has {model.m} components, coords shape {coords.shape}")
    return coords @ model.components + model.mean


def encode_then_scalar_quantize(x: np.ndarray, model: PcaModel, bits: int
                                ) -> tuple[sq.CodeMatrix, sq.ScalarQuantParams]:
    """Project onto the components, then quantize each coordinate column."""
    coords = encode(x, model).coords
    params = sq.fit(coords, bits)
    return sq.quantize(coords, params), params
