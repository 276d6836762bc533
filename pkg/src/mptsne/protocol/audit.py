"""Executable view-security assertions.

Checks, against ground truth, that each role saw exactly what the
threat model allows: S only noise-shifted values, T no plaintext at
all, participants nothing beyond their own data and the shared result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Dataset, TaskConfig
from .oracle import brute_force_sq_distances, quantize_rows, stacked_points
from .roles import NoiseLedger
from .transcript import (KIND_DECRYPTED, KIND_LOCAL_DATA, KIND_PUBLIC_KEY,
                         KIND_RESULT, ViewTranscript)

PARTICIPANT_ALLOWED_KINDS = {KIND_LOCAL_DATA, KIND_PUBLIC_KEY, KIND_RESULT}


@dataclass
class AuditCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class AuditReport:
    checks: list[AuditCheck] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [f"{c.name}: {c.detail}" for c in self.checks if not c.passed]

    def add(self, name: str, passed: bool, detail: str = "ok") -> None:
        self.checks.append(AuditCheck(name, passed, detail))


def assert_views(transcripts: dict[str, ViewTranscript], ledger: NoiseLedger,
                 datasets: list[Dataset], config: TaskConfig) -> AuditReport:
    """Verify every role's recorded view against the blinding secrets."""
    report = AuditReport()
    truth_int = quantize_rows(stacked_points(datasets, config), config.scale_bits)
    d2_int = brute_force_sq_distances(truth_int)

    _check_s_data_view(report, transcripts.get("S"), ledger, truth_int)
    _check_s_distance_view(report, transcripts.get("S"), ledger, d2_int)
    _check_t_view(report, transcripts.get("T"))
    _check_participant_views(report, transcripts, datasets, config)

    if ledger.pi == list(range(len(ledger.pi))):
        report.warnings.append(
            "step 6: permutation is the identity; symmetric-entry subtraction "
            "would expose row-noise differences"
        )
    return report


def _check_s_data_view(report: AuditReport, s_transcript: ViewTranscript | None,
                       ledger: NoiseLedger, truth_int: list[list[int]]) -> None:
    name = "S sees data only through fresh entry noise"
    if s_transcript is None:
        report.add(name, False, "no transcript for S")
        return
    entries = [e for e in s_transcript.by_kind(KIND_DECRYPTED) if e.step == 4]
    if not entries:
        report.add(name, False, "step 4: S recorded no decrypted data view")
        return
    observed = entries[0].values
    n, m = len(truth_int), len(truth_int[0])
    for i in range(n):
        for k in range(m):
            if observed[i][k] - ledger.sigma_int[i][k] != truth_int[i][k]:
                report.add(name, False,
                           f"step 3: entry ({i},{k}) is not truth + ledger noise")
                return
    if any(ledger.sigma_int[i][k] == 0 for i in range(n) for k in range(m)):
        report.add(name, False, "step 3: a data entry reached S unnoised (sigma = 0)")
        return
    report.add(name, True)


def _check_s_distance_view(report: AuditReport, s_transcript: ViewTranscript | None,
                           ledger: NoiseLedger, d2_int: list[list[int]]) -> None:
    name = "S sees distances only noised and reordered"
    if s_transcript is None:
        report.add(name, False, "no transcript for S")
        return
    entries = [e for e in s_transcript.by_kind(KIND_DECRYPTED) if e.step == 7]
    if not entries:
        report.add(name, False, "step 7: S recorded no decrypted distance view")
        return
    observed = entries[0].values
    pi = ledger.pi
    n = len(pi)
    for a in range(n):
        for b in range(n):
            truth = d2_int[pi[a]][pi[b]]
            if a == b:
                ok = observed[a][b] == truth == 0
            else:
                ok = observed[a][b] - ledger.eta_int[pi[a]] == truth
            if not ok:
                report.add(name, False,
                           f"step 6: entry ({a},{b}) is not truth + row noise under pi")
                return
    report.add(name, True)


def _check_t_view(report: AuditReport, t_transcript: ViewTranscript | None) -> None:
    name = "T decrypts nothing"
    if t_transcript is None:
        report.add(name, False, "no transcript for T")
        return
    decrypted = t_transcript.by_kind(KIND_DECRYPTED)
    if decrypted:
        steps = sorted({e.step for e in decrypted})
        report.add(name, False, f"T transcript has decrypted plaintexts at steps {steps}")
    else:
        report.add(name, True)


def _check_participant_views(report: AuditReport, transcripts: dict[str, ViewTranscript],
                             datasets: list[Dataset], config: TaskConfig) -> None:
    by_owner = {d.owner_id: d for d in datasets}
    for spec in config.participants:
        pid = spec.participant_id
        name = f"participant {pid} sees only own data and the result"
        transcript = transcripts.get(pid)
        if transcript is None:
            report.add(name, False, "no transcript")
            continue
        stray = transcript.kinds() - PARTICIPANT_ALLOWED_KINDS
        if stray:
            steps = sorted({e.step for e in transcript.entries if e.kind in stray})
            report.add(name, False, f"unexpected observations {sorted(stray)} at steps {steps}")
            continue
        own = transcript.by_kind(KIND_LOCAL_DATA)
        if any(not np.array_equal(e.values, by_owner[pid].points) for e in own):
            report.add(name, False, "local-data record does not match own dataset")
            continue
        report.add(name, True)
