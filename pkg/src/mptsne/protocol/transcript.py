"""View transcripts: everything a role observes in plaintext, for auditing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

KIND_DECRYPTED = "decrypted"
KIND_RECEIVED_PLAIN = "received_plain"
KIND_PUBLIC_KEY = "public_key"
KIND_LOCAL_DATA = "local_data"
KIND_RESULT = "result"


@dataclass
class TranscriptEntry:
    step: int
    kind: str
    description: str
    values: Any


@dataclass
class ViewTranscript:
    """Append-only log of plaintext values one role observed, by step."""

    role_id: str
    entries: list[TranscriptEntry] = field(default_factory=list)

    def record(self, step: int, kind: str, description: str, values: Any) -> None:
        self.entries.append(TranscriptEntry(step, kind, description, values))

    def kinds(self) -> set[str]:
        return {e.kind for e in self.entries}

    def by_kind(self, kind: str) -> list[TranscriptEntry]:
        return [e for e in self.entries if e.kind == kind]

    def to_jsonl(self) -> str:
        lines = []
        for e in self.entries:
            lines.append(json.dumps({
                "role": self.role_id,
                "step": e.step,
                "kind": e.kind,
                "description": e.description,
                "values": _jsonable(e.values),
            }))
        return "\n".join(lines) + ("\n" if lines else "")


def _jsonable(values: Any) -> Any:
    if hasattr(values, "tolist"):
        return values.tolist()
    if isinstance(values, (list, tuple)):
        return [_jsonable(v) for v in values]
    if isinstance(values, dict):
        return {k: _jsonable(v) for k, v in values.items()}
    return values
