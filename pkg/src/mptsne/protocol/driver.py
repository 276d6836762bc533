"""In-memory orchestration of a full protocol run.

Drives the three roles through all eight steps in one process: the
workhorse for exactness tests, security audits, and the step-timing
bench.  Networked deployments wire the same role objects over the
coordinator and frame transport instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import embedding
from ..aggregate import EmbeddingArtifact
from .config import ConfigError, Dataset, TaskConfig
from .roles import CollaboratorS, CollaboratorT, FaultInjection, Participant
from .transcript import ViewTranscript


@dataclass
class ProtocolRunResult:
    config: TaskConfig
    s: CollaboratorS
    t: CollaboratorT
    participants: dict[str, Participant]
    artifacts: dict[str, EmbeddingArtifact]
    recovered_matrix: np.ndarray
    tsne_result: embedding.TsneResult
    transcripts: dict[str, ViewTranscript] | None
    step_seconds: dict[int, float] = field(default_factory=dict)
    # intermediate transmissions, kept for exactness checks and audits
    z_matrix: list | None = None    # step 4 output (encrypted noised distances)
    w_matrix: list | None = None    # step 6 output (blinded, permuted)
    m_prime: np.ndarray | None = None  # step 7 output (affinities, permuted)


def normalize_datasets(datasets: list[Dataset]) -> tuple[list[Dataset], np.ndarray, np.ndarray]:
    """Shared per-dimension min-max normalization, applied locally.

    Returns the rescaled datasets plus the global ranges that would be
    exchanged through the coordinator.
    """
    lo = np.min([d.points.min(axis=0) for d in datasets], axis=0)
    hi = np.max([d.points.max(axis=0) for d in datasets], axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    rescaled = [
        Dataset((d.points - lo) / span, d.owner_id, d.labels)
        for d in datasets
    ]
    return rescaled, lo, hi


def run_joint_task(datasets: list[Dataset], config: TaskConfig, audit: bool = False,
                   faults: FaultInjection | None = None) -> ProtocolRunResult:
    """Execute steps 1..8 and distribute artifacts to every participant."""
    config.validate()
    roster = {p.participant_id: p.point_count for p in config.participants}
    provided = {d.owner_id: d.count for d in datasets}
    if provided != roster:
        raise ConfigError(f"datasets {provided} do not match roster {roster}")

    if config.normalize:
        datasets, _, _ = normalize_datasets(datasets)

    transcripts = None
    t_s = t_t = None
    p_transcripts: dict[str, ViewTranscript] = {}
    if audit:
        t_s, t_t = ViewTranscript("S"), ViewTranscript("T")
        p_transcripts = {d.owner_id: ViewTranscript(d.owner_id) for d in datasets}
        transcripts = {"S": t_s, "T": t_t, **p_transcripts}

    s = CollaboratorS(config, t_s)
    t = CollaboratorT(config, t_t, faults)
    participants = {
        d.owner_id: Participant(d, config, p_transcripts.get(d.owner_id))
        for d in datasets
    }

    timings: dict[int, float] = {}

    def timed(step: int, fn, *args):
        start = time.perf_counter()
        out = fn(*args)
        timings[step] = timings.get(step, 0.0) + time.perf_counter() - start
        return out

    key_msg = timed(1, s.step1_keygen)
    timed(1, t.receive_key, key_msg)
    for p in participants.values():
        timed(1, p.receive_key, key_msg)

    for spec in config.participants:
        upload = timed(2, participants[spec.participant_id].upload)
        timed(2, t.receive_upload, upload)

    noised = timed(3, t.step3_add_noise)
    z_msg = timed(4, s.step4_noised_distance, noised)
    timed(5, t.step5_encrypted_distance, z_msg)
    blinded = timed(6, t.step6_blind)
    prob_msg = timed(7, s.step7_probabilities, blinded)
    results = timed(8, t.step8_embed, prob_msg)

    artifacts = {}
    for pid, msg in results.items():
        raw = participants[pid].receive_result(msg)
        artifacts[pid] = EmbeddingArtifact.from_json_bytes(raw)

    return ProtocolRunResult(
        config=config,
        s=s,
        t=t,
        participants=participants,
        artifacts=artifacts,
        recovered_matrix=t.recovered_matrix,
        tsne_result=t.tsne_result,
        transcripts=transcripts,
        step_seconds=timings,
        z_matrix=z_msg.matrix,
        w_matrix=blinded.matrix,
        m_prime=prob_msg.values,
    )
