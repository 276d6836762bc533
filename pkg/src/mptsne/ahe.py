"""Additive homomorphic encryption (Paillier) and fixed-point encoding.

Ciphertexts support three operations without the secret key:

    add_enc(a, b)     decrypts to plaintext(a) + plaintext(b)
    sub_enc(a, b)     decrypts to plaintext(a) - plaintext(b)
    scalar_mul(k, a)  decrypts to k * plaintext(a)

Plaintexts are integers modulo n.  Reals enter the ring through
:class:`FixedPointCodec`: a value at *level* L is stored as
round(x * F**L) with F = 2**scale_bits.  Raw data and entry noises are
level 1; squared distances and products of two level-1 values are
level 2.  Level bookkeeping rides on the ciphertext so that mixing
scales by accident is caught instead of silently decoding garbage.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import struct
from dataclasses import dataclass

import gmpy2

DEFAULT_KEY_BITS = 2048
MIN_KEY_BITS = 512
DEFAULT_SCALE_BITS = 24


class KeyMismatchError(ValueError):
    """Operands were produced under different public keys."""


class LevelMismatchError(ValueError):
    """Operands carry different fixed-point scale levels."""


class OverflowBudgetError(ValueError):
    """Encoded magnitude would leave the safe half of the plaintext ring."""


def _random_prime(bits: int) -> int:
    """Random prime with exactly `bits` bits, crypto-quality randomness."""
    while True:
        candidate = secrets.randbits(bits) | (1 << (bits - 1)) | 1
        p = int(gmpy2.next_prime(candidate))
        if p.bit_length() == bits:
            return p


def _key_id(n: int) -> str:
    return hashlib.sha256(n.to_bytes((n.bit_length() + 7) // 8, "big")).hexdigest()[:16]


class PublicKey:
    """Paillier public key (n, g) with g = n + 1.

    With this generator g**m mod n^2 collapses to 1 + m*n, so encryption
    costs one modular exponentiation (the nonce term r**n).
    """

    def __init__(self, n: int):
        self.n = n
        self.nsquare = n * n
        self.g = n + 1
        self.key_id = _key_id(n)
        # Signed plaintexts live in (-n/2, n/2); the codec enforces this.
        self.max_int = n // 2 - 1

    def __eq__(self, other):
        return isinstance(other, PublicKey) and self.n == other.n

    def __hash__(self):
        return hash(self.n)

    def __repr__(self):
        return f"<PublicKey {self.key_id} ({self.n.bit_length()} bits)>"

    def raw_encrypt(self, plaintext: int, r: int | None = None) -> int:
        """Encrypt a ring element 0 <= plaintext < n to an integer mod n^2."""
        if not 0 <= plaintext < self.n:
            raise ValueError("plaintext outside ring [0, n)")
        if r is None:
            r = self.random_nonce()
        nude = (1 + plaintext * self.n) % self.nsquare
        return int(nude * gmpy2.powmod(r, self.n, self.nsquare) % self.nsquare)

    def encrypt(self, plaintext: int, level: int = 1) -> "Ciphertext":
        return Ciphertext(self.raw_encrypt(plaintext % self.n), self.key_id, level)

    def random_nonce(self) -> int:
        while True:
            r = secrets.randbelow(self.n)
            if r > 0:
                return r

    def to_json(self) -> str:
        return json.dumps({"n": str(self.n), "g": str(self.g)})

    @classmethod
    def from_json(cls, payload: str | bytes) -> "PublicKey":
        obj = json.loads(payload)
        pk = cls(int(obj["n"]))
        if pk.g != int(obj["g"]):
            raise ValueError("unsupported generator; expected g = n + 1")
        return pk


class PrivateKey:
    """Decryption trapdoor; never leaves the role that generated it."""

    def __init__(self, public_key: PublicKey, p: int, q: int):
        self.public_key = public_key
        phi = (p - 1) * (q - 1)
        self._lambda = phi
        self._mu = int(gmpy2.invert(phi, public_key.n))

    def raw_decrypt(self, value: int) -> int:
        pk = self.public_key
        u = gmpy2.powmod(value, self._lambda, pk.nsquare)
        return int((u - 1) // pk.n * self._mu % pk.n)

    def decrypt(self, ct: "Ciphertext") -> int:
        if ct.key_id != self.public_key.key_id:
            raise KeyMismatchError("ciphertext bound to a different key")
        return self.raw_decrypt(ct.value)


@dataclass(frozen=True)
class KeyPair:
    public_key: PublicKey
    private_key: PrivateKey
    key_bits: int


@dataclass(frozen=True)
class Ciphertext:
    """An encrypted ring element plus the metadata needed to use it safely.

    `key_id` binds the value to one public key; `level` is the fixed-point
    scale power carried by the hidden plaintext.
    """

    value: int
    key_id: str
    level: int = 1

    def to_bytes(self) -> bytes:
        """Big-endian magnitude with a 4-byte length prefix."""
        raw = self.value.to_bytes((self.value.bit_length() + 7) // 8 or 1, "big")
        return struct.pack(">I", len(raw)) + raw

    @classmethod
    def from_bytes(cls, data: bytes, key_id: str, level: int = 1) -> tuple["Ciphertext", int]:
        """Parse one serialized ciphertext; returns (ciphertext, bytes consumed)."""
        if len(data) < 4:
            raise ValueError("truncated ciphertext: missing length prefix")
        (length,) = struct.unpack(">I", data[:4])
        if len(data) < 4 + length:
            raise ValueError("truncated ciphertext body")
        value = int.from_bytes(data[4:4 + length], "big")
        return cls(value, key_id, level), 4 + length


def keygen(key_bits: int = DEFAULT_KEY_BITS) -> KeyPair:
    """Generate a keypair with an n of exactly `key_bits` bits.

    Rejects key_bits < 512: shorter moduli are both breakable and too
    small to leave headroom for level-2 fixed-point magnitudes.
    """
    if key_bits < MIN_KEY_BITS:
        raise ValueError(f"key_bits must be >= {MIN_KEY_BITS}, got {key_bits}")
    while True:
        p = _random_prime(key_bits // 2)
        q = _random_prime(key_bits // 2)
        if p == q:
            continue
        n = p * q
        if n.bit_length() == key_bits:
            break
    public = PublicKey(n)
    return KeyPair(public, PrivateKey(public, p, q), key_bits)


def _check_pair(a: Ciphertext, b: Ciphertext) -> None:
    if a.key_id != b.key_id:
        raise KeyMismatchError("operands bound to different keys")
    if a.level != b.level:
        raise LevelMismatchError(f"cannot combine level {a.level} with level {b.level}")


def add_enc(pk: PublicKey, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Homomorphic addition: decrypts to plaintext(a) + plaintext(b) mod n."""
    _check_pair(a, b)
    if a.key_id != pk.key_id:
        raise KeyMismatchError("operands do not match the supplied public key")
    return Ciphertext(a.value * b.value % pk.nsquare, a.key_id, a.level)


def sub_enc(pk: PublicKey, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Homomorphic subtraction: decrypts to plaintext(a) - plaintext(b) mod n."""
    _check_pair(a, b)
    if a.key_id != pk.key_id:
        raise KeyMismatchError("operands do not match the supplied public key")
    inv_b = gmpy2.invert(b.value, pk.nsquare)
    return Ciphertext(int(a.value * inv_b % pk.nsquare), a.key_id, a.level)


def scalar_mul(pk: PublicKey, k: int, a: Ciphertext, k_level: int = 0) -> Ciphertext:
    """Homomorphic scalar multiplication: decrypts to k * plaintext(a).

    `k` is a signed integer already expressed in ring units; `k_level` is
    the scale power it carries (0 for a bare integer, 1 for an encoded
    level-1 quantity).  The result's level is a.level + k_level.
    """
    if a.key_id != pk.key_id:
        raise KeyMismatchError("operand does not match the supplied public key")
    if abs(k) > pk.max_int:
        raise OverflowBudgetError("scalar magnitude exceeds the plaintext ring bound")
    if k < 0:
        base = int(gmpy2.invert(a.value, pk.nsquare))
        k = -k
    else:
        base = a.value
    return Ciphertext(int(gmpy2.powmod(base, k, pk.nsquare)), a.key_id, a.level + k_level)


class FixedPointCodec:
    """Maps signed reals onto the plaintext ring at scale F**level, F = 2**scale_bits.

    Negative values are represented as n - |v|; anything with
    |x * F**level| < n/2 round-trips with the correct sign and error
    at most 2**-scale_bits per level-1 encode.
    """

    def __init__(self, modulus: int, scale_bits: int = DEFAULT_SCALE_BITS):
        if scale_bits < 1:
            raise ValueError("scale_bits must be positive")
        self.modulus = modulus
        self.scale_bits = scale_bits
        self.scale = 1 << scale_bits
        self.half = modulus // 2

    def encode(self, x: float, level: int = 1) -> int:
        """Ring representative of round(x * F**level)."""
        if level not in (1, 2):
            raise ValueError("level must be 1 or 2")
        scaled = round(x * (self.scale ** level))
        if abs(scaled) >= self.half:
            raise OverflowBudgetError(
                f"|{x} * 2^{self.scale_bits * level}| exceeds half the plaintext ring"
            )
        return scaled % self.modulus

    def decode(self, v: int, level: int = 1) -> float:
        if level not in (1, 2):
            raise ValueError("level must be 1 or 2")
        return self.to_signed(v) / (self.scale ** level)

    def to_signed(self, v: int) -> int:
        """Center a ring element into (-n/2, n/2]."""
        v %= self.modulus
        return v - self.modulus if v > self.half else v

    def from_signed(self, s: int) -> int:
        if abs(s) >= self.half:
            raise OverflowBudgetError("signed magnitude exceeds half the plaintext ring")
        return s % self.modulus


def encrypt_value(pk: PublicKey, codec: FixedPointCodec, x: float, level: int = 1) -> Ciphertext:
    """Encode a real at the given level and encrypt it."""
    return pk.encrypt(codec.encode(x, level), level=level)


def decrypt_value(sk: PrivateKey, codec: FixedPointCodec, ct: Ciphertext) -> float:
    """Decrypt and decode back to a real at the ciphertext's level."""
    return codec.decode(sk.decrypt(ct), ct.level)
