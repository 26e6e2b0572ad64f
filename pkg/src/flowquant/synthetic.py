"""Seeded synthetic flow records standing in for a private flow-meter capture.

Columns mimic the three kinds of metric a flow exporter emits:

* counters - small non-negative integers, often zero (packets, retransmits,
  first-packet sizes)
* heavy-tailed reals - log-normal quantities reported with millisecond
  precision (durations, RTTs, byte rates)
* near-constant - a fixed value with rare deviations (MSS, window scale, flags)

Each (group, class) pair shifts the per-column location by a random offset
scaled by ``separation``; ``separation=0`` makes classes indistinguishable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow_model import FlowTable


@dataclass(frozen=True)
class SyntheticSpec:
    n_groups: int = 5
    classes_per_group: int = 20
    rows_per_class: int = 200
    d: int = 175
    seed: int = 0
    counter_fraction: float = 0.6
    heavy_fraction: float = 0.25
    separation: float = 0.2
    n_clients: int = 40

    def __post_init__(self):
        if min(self.n_groups, self.classes_per_group, self.rows_per_class, self.d) < 1:
            raise ValueError("counts must be positive")
        if self.n_clients < 2:
            raise ValueError("need at least 2 clients")
        if not (0 <= self.counter_fraction and 0 <= self.heavy_fraction
                and self.counter_fraction + self.heavy_fraction <= 1):
            raise ValueError("column-kind fractions must be non-negative and sum to <= 1")
        if self.separation < 0:
            raise ValueError("separation must be >= 0")

    def column_kinds(self) -> np.ndarray:
        n_counter = int(round(self.counter_fraction * self.d))
        n_heavy = min(self.d - n_counter, int(round(self.heavy_fraction * self.d)))
        kinds = np.array(["counter"] * n_counter + ["heavy"] * n_heavy
                         + ["constant"] * (self.d - n_counter - n_heavy))
        # interleave deterministically so column order does not follow kind
        return kinds[np.random.default_rng(self.seed ^ 0x5EED).permutation(self.d)]


def _column_names(kinds: np.ndarray) -> list[str]:
    seen: dict[str, int] = {}
    names = []
    for k in kinds:
        seen[k] = seen.get(k, 0) + 1
        names.append(f"{k}_{seen[k]:03d}")
    return names


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> FlowTable:
    rng = np.random.default_rng(spec.seed)
    kinds = spec.column_kinds()
    d = spec.d
    is_counter = kinds == "counter"
    is_heavy = kinds == "heavy"
    is_const = kinds == "constant"

    # column-level traits shared by every group
    counter_mean = np.exp(rng.uniform(np.log(0.5), np.log(200.0), d))
    zero_prob = np.where(rng.random(d) < 0.4, rng.uniform(0.6, 0.995, d), rng.uniform(0.0, 0.3, d))
    heavy_mu = rng.uniform(-1.0, 6.0, d)
    heavy_sigma = rng.uniform(1.5, 3.0, d)
    const_value = rng.choice([0.0, 1.0, 2.0, 1460.0, 65535.0, 14.0], d)
    const_noise_prob = rng.uniform(0.0, 0.05, d)

    blocks, labels, groups, clients = [], [], [], []
    m = spec.rows_per_class
    for g in range(spec.n_groups):
        group_shift = rng.normal(0.0, 0.3, d)
        for c in range(spec.classes_per_group):
            offset = group_shift + spec.separation * rng.normal(0.0, 1.0, d)
            block = np.empty((m, d))

            lam = counter_mean * np.exp(0.5 * offset)
            counts = rng.poisson(lam[None, :], (m, d)).astype(np.float64)
            keep = rng.random((m, d)) >= zero_prob[None, :]
            counts *= keep
            block[:, is_counter] = counts[:, is_counter]

            mu = heavy_mu + 0.5 * offset
            heavy = np.exp(rng.normal(mu[None, :], heavy_sigma[None, :], (m, d)))
            block[:, is_heavy] = np.round(heavy[:, is_heavy], 3)

            noise = rng.random((m, d)) < const_noise_prob[None, :]
            bump = rng.integers(1, 4, (m, d)) * (offset > 0)[None, :] + rng.integers(0, 2, (m, d))
            const = const_value[None, :] + noise * bump
            block[:, is_const] = const[:, is_const]

            blocks.append(block)
            labels += [f"as{g:02d}-dom{c:03d}.example"] * m
            groups += [f"AS{g:02d}"] * m
            clients += [f"client{k:03d}" for k in rng.integers(0, spec.n_clients, m)]

    numeric = np.vstack(blocks)
    # interleave rows so class blocks are not contiguous
    order = rng.permutation(numeric.shape[0])
    labels = np.asarray(labels, dtype=object)[order]
    groups = np.asarray(groups, dtype=object)[order]
    clients = np.asarray(clients, dtype=object)[order]
    return FlowTable(_column_names(kinds), numeric[order], labels, groups, clients)
