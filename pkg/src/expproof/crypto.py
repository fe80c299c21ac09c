"""Commitments, the keyed PRF, sample decomposition and lookup tables.

The PRF is BLAKE2b in keyed mode truncated to 128 bits; each digest is a
field element below 2**128 and is cut into ``b``-bit limbs that serve as
uniform samples. Commitments are SHA-256 over a domain tag, the
length-prefixed message and a blinding string.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

from .numeric import FieldElement, FixedPoint, exact_matmul, quantize_array, quantize_raw, rdiv, rdiv_array

PRF_NAME = "blake2b-128"
DIGEST_BITS = 128

_COMMIT_TAG = b"expproof/commit/v1"
_PRF_PERSON = b"expproof-prf-v1"


class SamplingError(ValueError):
    """Not enough digests, or a sample outside a table's domain."""


@dataclass(frozen=True)
class Commitment:
    digest: bytes

    def hex(self) -> str:
        return self.digest.hex()

    @classmethod
    def from_hex(cls, s: str) -> "Commitment":
        return cls(bytes.fromhex(s))


def commit(message: bytes, rho: bytes) -> Commitment:
    if len(rho) < 32:
        raise ValueError("blinding string must carry at least 32 bytes")
    h = hashlib.sha256()
    h.update(_COMMIT_TAG)
    h.update(len(message).to_bytes(8, "big"))
    h.update(message)
    h.update(rho)
    return Commitment(h.digest())


def verify_commitment(com: Commitment, message: bytes, rho: bytes) -> bool:
    try:
        other = commit(message, rho)
    except ValueError:
        return False
    return hmac.compare_digest(com.digest, other.digest)


@dataclass(frozen=True)
class PrfKey:
    k: FieldElement

    @classmethod
    def derive(cls, r_p: FieldElement, r_v: FieldElement) -> "PrfKey":
        return cls(r_p + r_v)


def prf_hash(key: PrfKey, index: int) -> FieldElement:
    if index < 0:
        raise ValueError("index must be non-negative")
    h = hashlib.blake2b(index.to_bytes(8, "big"), digest_size=DIGEST_BITS // 8, key=key.k.to_bytes(), person=_PRF_PERSON)
    return FieldElement(int.from_bytes(h.digest(), "big"))


def limbs_per_digest(b: int, width: int = DIGEST_BITS) -> int:
    if not 1 <= b <= width:
        raise ValueError(f"bit width {b} outside [1, {width}]")
    return width // b


def digests_needed(count: int, b: int, width: int = DIGEST_BITS) -> int:
    per = limbs_per_digest(b, width)
    return -(-count // per)


def decompose(h: FieldElement | int, b: int, width: int = DIGEST_BITS) -> tuple[list[int], int]:
    """Base-2**b limbs of a digest, least significant first, plus the remainder."""
    value = h.value if isinstance(h, FieldElement) else int(h)
    per = limbs_per_digest(b, width)
    mask = (1 << b) - 1
    limbs = [(value >> (b * i)) & mask for i in range(per)]
    return limbs, value >> (b * per)


def recompose(limbs, rem: int, b: int) -> int:
    acc = 0
    for i, limb in enumerate(limbs):
        acc += int(limb) << (b * i)
    return acc + (int(rem) << (b * len(limbs)))


def uniform_samples(hashes, b: int, count: int, width: int = DIGEST_BITS) -> np.ndarray:
    """First ``count`` limbs of the concatenated digest decompositions."""
    need = digests_needed(count, b, width)
    if len(hashes) < need:
        raise SamplingError(f"{count} samples of {b} bits need {need} digests, got {len(hashes)}")
    out: list[int] = []
    for h in hashes[:need]:
        out.extend(decompose(h, b, width)[0])
    return np.array(out[:count], dtype=np.int64)


def hash_stream(key: PrfKey, n_digests: int) -> list[FieldElement]:
    return [prf_hash(key, i) for i in range(n_digests)]


@dataclass(frozen=True, eq=False)
class LookupTable:
    """Function values on an evenly spaced grid, read back at the nearest point.

    Keys are raw integers at ``key_scale``; the grid runs from ``lo`` to
    ``hi`` (raw) in ``size`` points. Entries are raw at ``scale``.
    """

    name: str
    lo: int
    hi: int
    key_scale: int
    size: int
    scale: int
    entries: np.ndarray
    clamp: bool = True

    def index(self, key: int) -> int:
        key = int(key)
        if key < self.lo or key > self.hi:
            if not self.clamp:
                raise SamplingError(f"{self.name}: key {key} outside [{self.lo}, {self.hi}]")
            key = min(max(key, self.lo), self.hi)
        return rdiv((key - self.lo) * (self.size - 1), self.hi - self.lo)

    def indices(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        if keys.size and (keys.min() < self.lo or keys.max() > self.hi):
            if not self.clamp:
                raise SamplingError(f"{self.name}: key outside [{self.lo}, {self.hi}]")
            keys = np.clip(keys, self.lo, self.hi)
        return rdiv_array(exact_matmul((keys - self.lo)[:, None], np.array([[self.size - 1]])).ravel(), self.hi - self.lo).astype(np.int64)

    def lookup(self, keys) -> np.ndarray:
        return self.entries[self.indices(keys)]

    def grid(self) -> np.ndarray:
        """Grid points as floats (for oracles and plots)."""
        return self.lo / self.key_scale + np.arange(self.size) * ((self.hi - self.lo) / self.key_scale / (self.size - 1))

    def describe(self) -> dict:
        return {"name": self.name, "lo": self.lo, "hi": self.hi, "key_scale": self.key_scale, "size": self.size, "scale": self.scale}


def lookup_eval(table: LookupTable, key: FixedPoint | int) -> FixedPoint:
    if isinstance(key, FixedPoint):
        if key.scale != table.key_scale:
            raise ValueError(f"key scale {key.scale} != table key scale {table.key_scale}")
        key = key.raw
    return FixedPoint(int(table.entries[table.index(key)]), table.scale)


@lru_cache(maxsize=16)
def exp_table(scale: int, lo: float = -20.0, size: int = 200_000) -> LookupTable:
    """exp(t) on [lo, 0]; keys below ``lo`` clamp to the first entry (~0)."""
    lo_raw = quantize_raw(lo, scale)
    t = LookupTable("exp", lo_raw, 0, scale, size, scale, np.empty(0, dtype=np.int64))
    entries = quantize_array(np.exp(t.grid()), scale)
    return LookupTable("exp", lo_raw, 0, scale, size, scale, entries)


@lru_cache(maxsize=16)
def gauss_inv_cdf_table(b: int, scale: int, tail: float = 4.0) -> LookupTable:
    """Standard-normal quantile at the midpoint of each of the 2**b cells, clamped to +-tail."""
    n = 1 << b
    u = (np.arange(n, dtype=float) + 0.5) / n
    values = np.clip(ndtri(u), -tail, tail)
    return LookupTable("gauss_inv_cdf", 0, n - 1, 1, n, scale, quantize_array(values, scale), clamp=False)


@lru_cache(maxsize=16)
def recip_sqrt_table(scale: int, lo: float = 0.001, hi: float = 200.0, size: int = 200_000) -> LookupTable:
    """1/sqrt(t) on [lo, hi]; keys outside clamp to the end points."""
    lo_raw, hi_raw = quantize_raw(lo, scale), quantize_raw(hi, scale)
    t = LookupTable("recip_sqrt", lo_raw, hi_raw, scale, size, scale, np.empty(0, dtype=np.int64))
    entries = quantize_array(1.0 / np.sqrt(t.grid()), scale)
    return LookupTable("recip_sqrt", lo_raw, hi_raw, scale, size, scale, entries)


def gaussian_samples(uniform, table: LookupTable) -> np.ndarray:
    """Map uniform b-bit limbs through the inverse-CDF table (raw at ``table.scale``)."""
    u = np.asarray(uniform, dtype=np.int64)
    if u.size and (u.min() < 0 or u.max() >= table.size):
        raise SamplingError(f"uniform sample outside the table domain [0, {table.size})")
    return table.entries[u]
