"""Vector quantization: K-means++ seeding, Lloyd iterations, nearest-centroid coding."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

CHUNK_ROWS = 2048


class TooManyClustersError(ValueError):
    """K exceeds the number of distinct rows available for fitting."""


@dataclass(frozen=True)
class VqFitConfig:
    k_fraction: float = 0.05
    subsample_fraction: float = 1.0
    seed: int = 0
    max_iter: int = 100
    rel_tol: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.k_fraction <= 1.0:
            raise ValueError("k_fraction must lie in (0, 1]")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must lie in (0, 1]")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")

    def n_clusters(self, n_full: int) -> int:
        return max(1, math.floor(self.k_fraction * n_full + 0.5))

    def n_fit_rows(self, n_full: int) -> int:
        return min(n_full, math.ceil(self.subsample_fraction * n_full))


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray
    inertia: float
    iterations: int
    fit_rows: int
    inertia_history: tuple[float, ...] = field(default=())

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]

    @property
    def index_bits(self) -> int:
        return max(0, (self.k - 1).bit_length())


@dataclass(frozen=True, eq=False)
class VqEncoded:
    indices: np.ndarray


def _sqdist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x - c
    return np.sum(diff * diff, axis=-1)


def _assign_chunk(x: np.ndarray, c: np.ndarray, cc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xx = np.einsum("ij,ij->i", x, x)
    approx = xx[:, None] - 2.0 * (x @ c.T) + cc[None, :]
    best = np.argmin(approx, axis=1)
    lowest = approx[np.arange(x.shape[0]), best]
    # expansion error bound; rows with several candidates inside it are resolved exactly
    tol = 64.0 * x.shape[1] * np.finfo(np.float64).eps * (xx + cc.max())
    ambiguous = np.flatnonzero((approx <= (lowest + tol)[:, None]).sum(axis=1) > 1)
    for i in ambiguous:
        cand = np.flatnonzero(approx[i] <= lowest[i] + tol[i])
        exact = _sqdist(x[i], c[cand])
        best[i] = cand[np.flatnonzero(exact == exact.min())[0]]
    return best, _sqdist(x, c[best])


def assign(x: np.ndarray, centroids: np.ndarray, jobs: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per row (ties to lowest index) and its squared distance."""
    cc = np.einsum("ij,ij->i", centroids, centroids)
    starts = range(0, x.shape[0], CHUNK_ROWS)

    def work(s):
        return _assign_chunk(x[s:s + CHUNK_ROWS], centroids, cc)

    if jobs > 1 and x.shape[0] > CHUNK_ROWS:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    if not parts:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _distinct_rows(x: np.ndarray) -> int:
    return np.unique(x, axis=0).shape[0]


def kmeans_pp_init(x: np.ndarray, k: int, seed=0) -> np.ndarray:
    """D^2-weighted seeding; the first centroid is a uniformly drawn row."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct = _distinct_rows(x)
    if k > distinct:
        raise TooManyClustersError(f"K={k} exceeds {distinct} distinct rows")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    closest = _sqdist(x, x[chosen[0]])
    for _ in range(1, k):
        cum = np.cumsum(closest)
        total = cum[-1]
        if total <= 0.0:
            raise TooManyClustersError(f"K={k} exceeds distinct rows")
        idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
        idx = min(idx, n - 1)
        if closest[idx] == 0.0:
            # only reachable through rounding at a bucket edge
            positive = np.flatnonzero(closest > 0.0)
            idx = int(positive[min(np.searchsorted(positive, idx), positive.size - 1)])
        chosen.append(idx)
        np.minimum(closest, _sqdist(x, x[idx]), out=closest)
    return x[chosen].copy()


def _update(x: np.ndarray, labels: np.ndarray, d2: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    k = centroids.shape[0]
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels, minlength=k)
    present = np.flatnonzero(counts)
    starts = np.concatenate([[0], np.cumsum(counts[present])[:-1]])
    new = centroids.copy()
    new[present] = np.add.reduceat(x[order], starts, axis=0) / counts[present, None]
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        far = d2.copy()
        for j in empty:
            i = int(np.argmax(far))
            new[j] = x[i]
            far[i] = -1.0
    return new


def fit(x: np.ndarray, cfg: VqFitConfig, jobs: int = 1) -> Codebook:
    """K-means++ then Lloyd until the relative inertia gain drops below ``rel_tol``.

    K is taken from ``k_fraction`` of all ``n`` rows even when only a
    ``subsample_fraction`` of them is used for fitting.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 1:
        raise ValueError("cannot fit a codebook on zero rows")
    k = cfg.n_clusters(n)
    sub_seq, init_seq = np.random.SeedSequence(int(cfg.seed)).spawn(2)
    n_fit = cfg.n_fit_rows(n)
    if n_fit < n:
        rows = np.sort(np.random.default_rng(sub_seq).choice(n, n_fit, replace=False))
        xf = np.ascontiguousarray(x[rows])
    else:
        xf = x
    if k > n_fit:
        raise TooManyClustersError(f"K={k} exceeds the {n_fit} fit rows")

    centroids = kmeans_pp_init(xf, k, init_seq)
    labels, d2 = assign(xf, centroids, jobs)
    history = [float(d2.sum())]
    iterations = 0
    for it in range(cfg.max_iter):
        if history[-1] == 0.0:
            break
        centroids = _update(xf, labels, d2, centroids)
        labels, d2 = assign(xf, centroids, jobs)
        history.append(float(d2.sum()))
        iterations = it + 1
        prev, cur = history[-2], history[-1]
        if prev - cur <= cfg.rel_tol * prev:
            break
    return Codebook(centroids, history[-1], iterations, n_fit, tuple(history))


def encode(x: np.ndarray, cb: Codebook, jobs: int = 1) -> VqEncoded:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cb.d:
        raise ValueError(f"codebook has {cb.d} columns, data shape {x.shape}")
    labels, _ = assign(x, cb.centroids, jobs)
    return VqEncoded(labels.astype(np.uint64))


def decode(enc: VqEncoded | np.ndarray, cb: Codebook) -> np.ndarray:
    idx = enc.indices if isinstance(enc, VqEncoded) else np.asarray(enc)
    idx = idx.astype(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= cb.k):
        raise ValueError(f"index out of range for K={cb.k}")
    return cb.centroids[idx]
