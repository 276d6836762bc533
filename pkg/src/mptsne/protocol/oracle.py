"""Plaintext reference pipeline: the independent check for every protocol claim.

Computes the squared-distance matrix by brute force on the same
fixed-point grid the protocol transports, then affinities and the
embedding with the identical optimizer and seed — entirely without
encryption.  Test and audit use only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import embedding
from .config import Dataset, TaskConfig


@dataclass
class OracleResult:
    d2_int: list[list[int]]       # squared distances in level-2 integer units
    sq_distances: np.ndarray      # the same, decoded to reals
    P: np.ndarray                 # symmetric affinities
    tsne_result: embedding.TsneResult


def quantize_rows(points: np.ndarray, scale_bits: int) -> list[list[int]]:
    """Signed level-1 integers: the exact values the protocol encrypts."""
    scale = 1 << scale_bits
    return [[round(x * scale) for x in row] for row in points]


def brute_force_sq_distances(quantized: list[list[int]]) -> list[list[int]]:
    """Pairwise squared Euclidean distances by explicit summation."""
    n = len(quantized)
    d = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            total = 0
            for a, b in zip(quantized[i], quantized[j]):
                diff = a - b
                total += diff * diff
            d[i][j] = total
    return d


def stacked_points(datasets: list[Dataset], config: TaskConfig) -> np.ndarray:
    """All rows in roster order, the global index the protocol uses."""
    by_owner = {d.owner_id: d for d in datasets}
    return np.vstack([by_owner[p.participant_id].points for p in config.participants])


def run_plaintext_oracle(datasets: list[Dataset], config: TaskConfig) -> OracleResult:
    points = stacked_points(datasets, config)
    quantized = quantize_rows(points, config.scale_bits)
    d2_int = brute_force_sq_distances(quantized)
    scale_sq = float((1 << config.scale_bits) ** 2)
    sq_distances = np.array([[v / scale_sq for v in row] for row in d2_int])
    P = embedding.joint_probabilities(sq_distances, config.perplexity)
    result = embedding.run_tsne(P, config.tsne)
    return OracleResult(d2_int, sq_distances, P.values, result)
