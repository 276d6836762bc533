"""Step-timing bench: wall-clock per protocol step on synthetic data.

The CSV covers the transmission-and-compute steps 2 through 8 (keygen
is a one-off excluded from the step breakdown).  Published timings for
a large compute-cluster deployment are carried along for context; local
numbers are environment-bound and not comparable across machines.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .embedding import TsneConfig
from .protocol import Dataset, ParticipantSpec, TaskConfig, run_joint_task

BENCH_STEPS = (2, 3, 4, 5, 6, 7, 8)

# reference wall-clock for a 300-vCPU cluster deployment (4000 points,
# 32 dims); context only, never asserted
REFERENCE_CLUSTER_SECONDS = {2: 0.1, 3: 0.1, 4: 10.4, 5: 13.3, 6: 11.0, 7: 3.1, 8: 0.7}


@dataclass
class BenchReport:
    n: int
    m: int
    key_bits: int
    scale_bits: int
    workers: int
    step_seconds: dict[int, float]
    keygen_seconds: float

    @property
    def total_seconds(self) -> float:
        return self.keygen_seconds + sum(self.step_seconds.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("step,seconds\n")
        for step in BENCH_STEPS:
            buf.write(f"{step},{self.step_seconds[step]:.6f}\n")
        return buf.getvalue()


def run_bench(n: int = 546, m: int = 9, key_bits: int = 512, scale_bits: int = 16,
              seed: int = 0, workers: int = 1, iterations: int = 1000,
              participants: int = 2) -> BenchReport:
    """Time one full protocol run at the given problem size."""
    counts = [n // participants] * participants
    counts[0] += n - sum(counts)
    perplexity = min(30.0, max(2.0, (n - 1) / 3 - 1))
    config = TaskConfig(
        participants=[ParticipantSpec(f"P{i}", c) for i, c in enumerate(counts)],
        dimensions=m,
        perplexity=perplexity,
        tsne=TsneConfig(perplexity=perplexity, iterations=iterations, init_seed=seed),
        key_bits=key_bits,
        scale_bits=scale_bits,
        max_abs_value=10.0,
        seed=seed,
        workers=workers,
    )
    rng = np.random.default_rng(seed)
    datasets = [
        Dataset(rng.uniform(-10, 10, (spec.point_count, m)), spec.participant_id)
        for spec in config.participants
    ]
    result = run_joint_task(datasets, config)
    return BenchReport(
        n=n, m=m, key_bits=key_bits, scale_bits=scale_bits, workers=workers,
        step_seconds={step: result.step_seconds.get(step, 0.0) for step in BENCH_STEPS},
        keygen_seconds=result.step_seconds.get(1, 0.0),
    )
