"""Role state machines for the eight-step joint embedding protocol.

Participants own data.  Collaborator S holds the only private key and
sees nothing but noised values; collaborator T holds every ciphertext
and all noise/permutation secrets but no key.  Privacy rests on S and T
not colluding.

Step map: 1 keygen+broadcast (S), 2 encrypted upload (P), 3 entry
noising (T), 4 noised distances (S), 5 encrypted exact distances (T),
6 row noise + conjugate permutation (T), 7 affinity computation on the
blinded matrix (S), 8 un-permute + t-SNE + distribution (T).
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .. import ahe, embedding
from .. import parallel
from ..aggregate import EmbeddedPoint, export_artifact
from .config import MODE_SCATTERPLOT, Dataset, TaskConfig
from .messages import (BlindedDistances, DataUpload, EmbeddingResult,
                       KeyBroadcast, NoisedData, NoisedDistances, ProbMatrix)
from .transcript import (KIND_DECRYPTED, KIND_LOCAL_DATA, KIND_PUBLIC_KEY,
                         KIND_RECEIVED_PLAIN, KIND_RESULT, ViewTranscript)


class ProtocolError(RuntimeError):
    """A step's preconditions were violated or its data is malformed."""


@dataclass
class FaultInjection:
    """Deliberate protocol violations for audit testing."""

    skip_entry_noise: bool = False      # step 3 with sigma identically zero
    skip_row_noise: bool = False        # step 6 with eta identically zero
    identity_permutation: bool = False  # step 6 without reordering


@dataclass
class NoiseLedger:
    """T's private record of every blinding secret.  Never serialized off T.

    delta values are implied: delta_ijk = sigma_ik - sigma_jk, computed
    on demand from the stored entry noises.
    """

    sigma_int: list[list[int]] = field(default_factory=list)  # level-1 units, N x m
    eta_int: list[int] = field(default_factory=list)          # level-2 units, N
    pi: list[int] = field(default_factory=list)               # permutation of range(N)

    def delta_int(self, i: int, j: int, k: int) -> int:
        return self.sigma_int[i][k] - self.sigma_int[j][k]


def _task_rng(config: TaskConfig, purpose: str) -> np.random.Generator:
    """Deterministic per (seed, task, purpose) in test mode, OS entropy otherwise."""
    if config.seed is None:
        return np.random.default_rng(secrets.randbits(128))
    digest = hashlib.sha256(f"{config.task_id}:{purpose}".encode()).digest()
    return np.random.default_rng([config.seed, int.from_bytes(digest[:8], "big")])


# Module-level row workers so the pool can pickle them (matrices partition
# by row ranges; each worker writes only its own output slot).

def _encrypt_int_row(pk: ahe.PublicKey, level: int, row: list[int]) -> list[ahe.Ciphertext]:
    return [pk.encrypt(v % pk.n, level=level) for v in row]


def _decrypt_signed_row(sk: ahe.PrivateKey, half: int,
                        row: list[ahe.Ciphertext]) -> list[int]:
    out = []
    for ct in row:
        v = sk.decrypt(ct)
        out.append(v - sk.public_key.n if v > half else v)
    return out


def _noise_row(pk: ahe.PublicKey,
               pair: tuple[list[ahe.Ciphertext], list[int]]) -> list[ahe.Ciphertext]:
    cts, sigma_ring = pair
    return [ahe.add_enc(pk, ct, pk.encrypt(s, level=1))
            for ct, s in zip(cts, sigma_ring)]


def _row_corrections(i: int) -> list[tuple[int, ahe.Ciphertext]]:
    ctx = parallel.get_context()
    pk, rows, sigma, m = ctx["pk"], ctx["rows"], ctx["sigma"], ctx["m"]
    out = []
    for j in range(i + 1, len(rows)):
        correction = None
        for k in range(m):
            delta = sigma[i][k] - sigma[j][k]
            term = pk.encrypt(delta * delta % pk.n, level=2)
            term = ahe.add_enc(pk, term,
                               ahe.scalar_mul(pk, 2 * delta, rows[i][k], k_level=1))
            term = ahe.sub_enc(pk, term,
                               ahe.scalar_mul(pk, 2 * delta, rows[j][k], k_level=1))
            correction = term if correction is None else ahe.add_enc(pk, correction, term)
        out.append((j, correction))
    return out


class Participant:
    """A data owner: encrypts local rows for T, receives the final artifact."""

    def __init__(self, dataset: Dataset, config: TaskConfig,
                 transcript: ViewTranscript | None = None):
        self.dataset = dataset
        self.config = config
        self.transcript = transcript
        self.public_key: ahe.PublicKey | None = None
        self.codec: ahe.FixedPointCodec | None = None
        self.artifact_bytes: bytes | None = None
        if transcript is not None:
            transcript.record(0, KIND_LOCAL_DATA, "own raw dataset",
                              dataset.points.copy())

    def receive_key(self, msg: KeyBroadcast) -> None:
        self.public_key = msg.public_key
        self.codec = ahe.FixedPointCodec(msg.public_key.n, self.config.scale_bits)
        if self.transcript is not None:
            self.transcript.record(1, KIND_PUBLIC_KEY, "broadcast public key",
                                   msg.public_key.to_json())

    def upload(self) -> DataUpload:
        if self.public_key is None:
            raise ProtocolError("no public key received yet")
        pts = self.dataset.points
        if pts.shape[1] != self.config.dimensions:
            raise ProtocolError(
                f"dimension mismatch: data has {pts.shape[1]} columns, "
                f"task expects {self.config.dimensions}"
            )
        if np.abs(pts).max() > self.config.max_abs_value:
            raise ProtocolError(
                f"data magnitude {np.abs(pts).max():.6g} exceeds the agreed "
                f"bound {self.config.max_abs_value:.6g}"
            )
        rows = [[self.public_key.encrypt(self.codec.encode(x, 1), level=1) for x in row]
                for row in pts]
        labels = None
        if self.config.visualization_mode == MODE_SCATTERPLOT and self.dataset.labels:
            labels = list(self.dataset.labels)
        return DataUpload(self.config.task_id, self.dataset.owner_id, rows, labels)

    def receive_result(self, msg: EmbeddingResult) -> bytes:
        self.artifact_bytes = msg.artifact_bytes
        if self.transcript is not None:
            self.transcript.record(8, KIND_RESULT, "final embedding artifact",
                                   msg.artifact_bytes.decode())
        return msg.artifact_bytes


class CollaboratorS:
    """Key holder: decrypts only noised values, computes affinities."""

    def __init__(self, config: TaskConfig, transcript: ViewTranscript | None = None):
        self.config = config
        self.transcript = transcript
        self.keypair: ahe.KeyPair | None = None
        self.codec: ahe.FixedPointCodec | None = None

    def step1_keygen(self) -> KeyBroadcast:
        self.keypair = ahe.keygen(self.config.key_bits)
        self.codec = ahe.FixedPointCodec(self.keypair.public_key.n, self.config.scale_bits)
        return KeyBroadcast(self.config.task_id, self.keypair.public_key)

    def _decrypt_signed(self, matrix) -> list[list[int]]:
        sk = self.keypair.private_key
        worker = partial(_decrypt_signed_row, sk, self.codec.half)
        return parallel.map_rows(worker, matrix, self.config.workers)

    def step4_noised_distance(self, msg: NoisedData) -> NoisedDistances:
        """Decrypt noised rows, square pairwise differences in exact integers."""
        if self.keypair is None:
            raise ProtocolError("keygen has not run")
        noised = self._decrypt_signed(msg.matrix)  # level-1 integer units
        if self.transcript is not None:
            self.transcript.record(4, KIND_DECRYPTED, "noised data entries", noised)
        n = len(noised)
        pk = self.keypair.public_key
        z_int = [[0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                zij = sum((a - b) ** 2 for a, b in zip(noised[i], noised[j]))
                z_int[i][j] = z_int[j][i] = zij
        z = parallel.map_rows(partial(_encrypt_int_row, pk, 2), z_int,
                              self.config.workers)
        return NoisedDistances(self.config.task_id, z)

    def step7_probabilities(self, msg: BlindedDistances) -> ProbMatrix:
        """Affinities from the blinded matrix; row noise cancels in the softmax."""
        if self.keypair is None:
            raise ProtocolError("keygen has not run")
        w_int = self._decrypt_signed(msg.matrix)  # level-2 integer units
        if self.transcript is not None:
            self.transcript.record(7, KIND_DECRYPTED, "blinded distance entries", w_int)
        n = len(w_int)
        for i in range(n):
            if w_int[i][i] != 0:
                raise ProtocolError(f"self-distance at row {i} decrypts non-zero")
        scale_sq = float(self.codec.scale ** 2)
        w = np.array([[v / scale_sq for v in row] for row in w_int])
        bandwidths = embedding.calibrate_bandwidths(w, self.config.perplexity)
        conditional = embedding.conditional_probs(w, bandwidths)
        symmetric = embedding.symmetrize(conditional)
        return ProbMatrix(self.config.task_id, symmetric.values)


class CollaboratorT:
    """Ciphertext holder: noises, corrects, blinds, and runs the optimizer."""

    def __init__(self, config: TaskConfig, transcript: ViewTranscript | None = None,
                 faults: FaultInjection | None = None):
        self.config = config
        self.transcript = transcript
        self.faults = faults or FaultInjection()
        self.public_key: ahe.PublicKey | None = None
        self.codec: ahe.FixedPointCodec | None = None
        self.ledger = NoiseLedger()
        self.uploads: dict[str, DataUpload] = {}
        self.rows: list[list[ahe.Ciphertext]] = []
        self.row_owner: list[str] = []
        self.row_label: list[str | None] = []
        self.encrypted_distances: list[list[ahe.Ciphertext]] | None = None
        self.recovered_matrix: np.ndarray | None = None
        self.tsne_result: embedding.TsneResult | None = None
        self.artifact_points: list[EmbeddedPoint] | None = None

    def receive_key(self, msg: KeyBroadcast) -> None:
        self.public_key = msg.public_key
        self.codec = ahe.FixedPointCodec(msg.public_key.n, self.config.scale_bits)
        if self.transcript is not None:
            self.transcript.record(1, KIND_PUBLIC_KEY, "broadcast public key",
                                   msg.public_key.to_json())

    def receive_upload(self, msg: DataUpload) -> None:
        spec = next((p for p in self.config.participants
                     if p.participant_id == msg.owner_id), None)
        if spec is None:
            raise ProtocolError(f"unknown participant {msg.owner_id!r}")
        if msg.owner_id in self.uploads:
            raise ProtocolError(f"duplicate upload from {msg.owner_id!r}")
        if len(msg.rows) != spec.point_count:
            raise ProtocolError(
                f"{msg.owner_id!r} promised {spec.point_count} points, "
                f"uploaded {len(msg.rows)}"
            )
        for row in msg.rows:
            if len(row) != self.config.dimensions:
                raise ProtocolError(
                    f"dimension mismatch in upload from {msg.owner_id!r}"
                )
        self.uploads[msg.owner_id] = msg

    def all_uploaded(self) -> bool:
        return set(self.uploads) == {p.participant_id for p in self.config.participants}

    def _assemble_rows(self) -> None:
        # global row order is roster order, whatever order uploads landed in
        self.rows, self.row_owner, self.row_label = [], [], []
        for spec in self.config.participants:
            upload = self.uploads[spec.participant_id]
            self.rows.extend(upload.rows)
            self.row_owner.extend([spec.participant_id] * len(upload.rows))
            self.row_label.extend(upload.labels or [None] * len(upload.rows))

    def step3_add_noise(self) -> NoisedData:
        """Add a fresh level-1 noise to every entry; record it in the ledger."""
        if not self.all_uploaded():
            missing = ({p.participant_id for p in self.config.participants}
                       - set(self.uploads))
            raise ProtocolError(f"missing uploads from {sorted(missing)}")
        self._assemble_rows()
        rng = _task_rng(self.config, "entry-noise")
        n, m = len(self.rows), self.config.dimensions
        s = self.config.sigma_range
        sigma = np.zeros((n, m)) if self.faults.skip_entry_noise else rng.uniform(-s, s, (n, m))
        pk = self.public_key
        self.ledger.sigma_int = []
        sigma_ring_rows = []
        for i in range(n):
            sigma_row = [self.codec.encode(sigma[i][k], 1) for k in range(m)]
            sigma_ring_rows.append(sigma_row)
            self.ledger.sigma_int.append([self.codec.to_signed(v) for v in sigma_row])
        noised = parallel.map_rows(partial(_noise_row, pk),
                                   list(zip(self.rows, sigma_ring_rows)),
                                   self.config.workers)
        return NoisedData(self.config.task_id, noised)

    def step5_encrypted_distance(self, msg: NoisedDistances) -> None:
        """Cancel the entry noise inside the ciphertexts.

        d_ij^2 = z_ij - sum_k (delta_ijk^2 + 2 delta_ijk x_ik - 2 delta_ijk x_jk)
        with delta_ijk = sigma_ik - sigma_jk known to T in plaintext; every
        term sits at level-2 scale so the cancellation is exact in integers.
        """
        if not self.ledger.sigma_int:
            raise ProtocolError("entry noise has not been drawn")
        pk = self.public_key
        z = msg.matrix
        n = len(z)
        context = {"pk": pk, "rows": self.rows, "sigma": self.ledger.sigma_int,
                   "m": self.config.dimensions}
        corrections = parallel.map_with_context(_row_corrections, range(n), context,
                                                self.config.workers)
        d: list[list] = [[None] * n for _ in range(n)]
        for i in range(n):
            d[i][i] = z[i][i]
            for j, correction in corrections[i]:
                d[i][j] = ahe.sub_enc(pk, z[i][j], correction)
                d[j][i] = ahe.sub_enc(pk, z[j][i], correction)
        self.encrypted_distances = d

    def step6_blind(self) -> BlindedDistances:
        """Constant row noise off the diagonal, then conjugate permutation.

        The diagonal keeps no noise: self-distances are always zero, so a
        noised diagonal would hand S the row noise for free.
        """
        if self.encrypted_distances is None:
            raise ProtocolError("encrypted distances not computed")
        rng = _task_rng(self.config, "row-noise")
        pk = self.public_key
        n = len(self.encrypted_distances)
        eta = (np.zeros(n) if self.faults.skip_row_noise
               else rng.uniform(0.0, self.config.eta_range, n))
        self.ledger.eta_int = [self.codec.to_signed(self.codec.encode(v, 2)) for v in eta]
        pi = (np.arange(n) if self.faults.identity_permutation
              else _task_rng(self.config, "permutation").permutation(n))
        self.ledger.pi = [int(v) for v in pi]

        w: list[list] = [[None] * n for _ in range(n)]
        for i in range(n):
            eta_ct = pk.encrypt(self.ledger.eta_int[i] % pk.n, level=2)
            for j in range(n):
                if i == j:
                    w[i][j] = self.encrypted_distances[i][j]
                else:
                    w[i][j] = ahe.add_enc(pk, self.encrypted_distances[i][j], eta_ct)
        permuted = [[w[pi[a]][pi[b]] for b in range(n)] for a in range(n)]
        return BlindedDistances(self.config.task_id, permuted)

    def step8_embed(self, msg: ProbMatrix) -> dict[str, EmbeddingResult]:
        """Recover natural row order, optimize the layout, package artifacts."""
        if not self.ledger.pi:
            raise ProtocolError("permutation not drawn")
        if self.transcript is not None:
            self.transcript.record(8, KIND_RECEIVED_PLAIN,
                                   "symmetric affinities (permuted order)",
                                   msg.values.copy())
        n = len(self.ledger.pi)
        pi = np.array(self.ledger.pi)
        recovered = np.empty_like(msg.values)
        recovered[np.ix_(pi, pi)] = msg.values
        self.recovered_matrix = recovered

        self.tsne_result = embedding.run_tsne(recovered, self.config.tsne)
        Y = self.tsne_result.Y
        self.artifact_points = [
            EmbeddedPoint(i, self.row_owner[i], float(Y[i, 0]), float(Y[i, 1]),
                          self.row_label[i])
            for i in range(n)
        ]
        results = {}
        for spec in self.config.participants:
            artifact = export_artifact(self.artifact_points, self.config.visualization_mode,
                                       task_id=self.config.task_id,
                                       for_owner=spec.participant_id)
            results[spec.participant_id] = EmbeddingResult(self.config.task_id,
                                                           artifact.to_json_bytes())
        return results
