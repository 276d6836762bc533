"""Messages exchanged between roles, with byte codecs for the wire.

Matrices travel row-major with a (rows, cols) big-endian header;
ciphertexts as length-prefixed big-endian magnitudes.  The frame layer
adds task routing, so payloads carry only content.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..ahe import Ciphertext, PublicKey

TAG_KEY_BROADCAST = 0x01
TAG_DATA_UPLOAD = 0x02
TAG_NOISED_DATA = 0x03
TAG_NOISED_DISTANCES = 0x04
TAG_BLINDED_DISTANCES = 0x05
TAG_PROB_MATRIX = 0x06
TAG_EMBEDDING_RESULT = 0x07


def pack_ct_matrix(rows: list[list[Ciphertext]]) -> bytes:
    n = len(rows)
    m = len(rows[0]) if n else 0
    parts = [struct.pack(">II", n, m)]
    for row in rows:
        if len(row) != m:
            raise ValueError("ragged ciphertext matrix")
        parts.extend(ct.to_bytes() for ct in row)
    return b"".join(parts)


def unpack_ct_matrix(payload: bytes, key_id: str, level: int) -> list[list[Ciphertext]]:
    n, m = struct.unpack(">II", payload[:8])
    offset = 8
    rows = []
    for _ in range(n):
        row = []
        for _ in range(m):
            ct, used = Ciphertext.from_bytes(payload[offset:], key_id, level)
            offset += used
            row.append(ct)
        rows.append(row)
    if offset != len(payload):
        raise ValueError("trailing bytes after ciphertext matrix")
    return rows


def pack_float_matrix(values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype=float)
    n, m = values.shape
    return struct.pack(">II", n, m) + values.astype(">f8").tobytes()


def unpack_float_matrix(payload: bytes) -> np.ndarray:
    n, m = struct.unpack(">II", payload[:8])
    return np.frombuffer(payload[8:], dtype=">f8").reshape(n, m).astype(float)


def _pack_str(s: str) -> bytes:
    raw = s.encode()
    return struct.pack(">H", len(raw)) + raw


def _unpack_str(payload: bytes, offset: int) -> tuple[str, int]:
    (length,) = struct.unpack(">H", payload[offset:offset + 2])
    end = offset + 2 + length
    return payload[offset + 2:end].decode(), end


@dataclass
class KeyBroadcast:
    task_id: str
    public_key: PublicKey
    tag = TAG_KEY_BROADCAST

    def encode(self) -> bytes:
        return self.public_key.to_json().encode()

    @classmethod
    def decode(cls, task_id: str, payload: bytes) -> "KeyBroadcast":
        return cls(task_id, PublicKey.from_json(payload))


@dataclass
class DataUpload:
    task_id: str
    owner_id: str
    rows: list[list[Ciphertext]]  # level-1 encrypted points
    labels: list[str] | None = None
    tag = TAG_DATA_UPLOAD

    def encode(self) -> bytes:
        label_blob = b"\x00"
        if self.labels is not None:
            label_blob = b"\x01" + struct.pack(">I", len(self.labels))
            label_blob += b"".join(_pack_str(lab) for lab in self.labels)
        return _pack_str(self.owner_id) + label_blob + pack_ct_matrix(self.rows)

    @classmethod
    def decode(cls, task_id: str, payload: bytes, key_id: str) -> "DataUpload":
        owner_id, offset = _unpack_str(payload, 0)
        labels = None
        flag = payload[offset]
        offset += 1
        if flag == 1:
            (count,) = struct.unpack(">I", payload[offset:offset + 4])
            offset += 4
            labels = []
            for _ in range(count):
                lab, offset = _unpack_str(payload, offset)
                labels.append(lab)
        rows = unpack_ct_matrix(payload[offset:], key_id, level=1)
        return cls(task_id, owner_id, rows, labels)


@dataclass
class NoisedData:
    task_id: str
    matrix: list[list[Ciphertext]]  # level-1, all participants stacked
    tag = TAG_NOISED_DATA

    def encode(self) -> bytes:
        return pack_ct_matrix(self.matrix)

    @classmethod
    def decode(cls, task_id: str, payload: bytes, key_id: str) -> "NoisedData":
        return cls(task_id, unpack_ct_matrix(payload, key_id, level=1))


@dataclass
class NoisedDistances:
    task_id: str
    matrix: list[list[Ciphertext]]  # level-2, N x N
    tag = TAG_NOISED_DISTANCES

    def encode(self) -> bytes:
        return pack_ct_matrix(self.matrix)

    @classmethod
    def decode(cls, task_id: str, payload: bytes, key_id: str) -> "NoisedDistances":
        return cls(task_id, unpack_ct_matrix(payload, key_id, level=2))


@dataclass
class BlindedDistances:
    task_id: str
    matrix: list[list[Ciphertext]]  # level-2, N x N, noised and conjugate-permuted
    tag = TAG_BLINDED_DISTANCES

    def encode(self) -> bytes:
        return pack_ct_matrix(self.matrix)

    @classmethod
    def decode(cls, task_id: str, payload: bytes, key_id: str) -> "BlindedDistances":
        return cls(task_id, unpack_ct_matrix(payload, key_id, level=2))


@dataclass
class ProbMatrix:
    task_id: str
    values: np.ndarray  # symmetric affinities, permuted index space
    tag = TAG_PROB_MATRIX

    def encode(self) -> bytes:
        return pack_float_matrix(self.values)

    @classmethod
    def decode(cls, task_id: str, payload: bytes) -> "ProbMatrix":
        return cls(task_id, unpack_float_matrix(payload))


@dataclass
class EmbeddingResult:
    task_id: str
    artifact_bytes: bytes  # recipient-filtered EmbeddingArtifact JSON
    tag = TAG_EMBEDDING_RESULT

    def encode(self) -> bytes:
        return self.artifact_bytes

    @classmethod
    def decode(cls, task_id: str, payload: bytes) -> "EmbeddingResult":
        return cls(task_id, payload)
