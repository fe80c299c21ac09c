"""Fixed-point and prime-field arithmetic.

Every quantity that crosses the prover/verifier boundary is an integer:
reals are carried as ``raw / scale`` and rounded half-away-from-zero, so
both sides reproduce each other bit for bit. Vectors are plain numpy
integer arrays sharing one scale; :class:`FixedPoint` is the scalar form
used at API and serialization edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from numbers import Integral, Rational

import numpy as np

DEFAULT_SCALE = 10_000

RAW_BITS = 63
RAW_MAX = (1 << RAW_BITS) - 1

# Scalar field of BN254, the curve under Halo2/ezkl. Any public prime above
# 2**128 would do; this one keeps digests interchangeable with a real circuit.
FIELD_PRIME = 21888242871839275222246405745257275088548364400416034343698204186575808495617

# int64 products are only used below this magnitude; above it we fall back to
# Python integers (object arrays), which never overflow.
_SAFE_INT64 = 1 << 62


class FixedPointRangeError(OverflowError):
    """Raised when a raw value leaves the signed 64-bit range."""


def _check_range(raw: int) -> int:
    if raw > RAW_MAX or raw < -RAW_MAX:
        raise FixedPointRangeError(f"raw value {raw} exceeds the {RAW_BITS}-bit fixed-point range")
    return raw


def rdiv(num: int, den: int) -> int:
    """Integer division rounding half away from zero (``den`` > 0)."""
    if den <= 0:
        raise ValueError("denominator must be positive")
    q = (2 * abs(num) + den) // (2 * den)
    return q if num >= 0 else -q


def rdiv_array(num, den: int) -> np.ndarray:
    """Elementwise :func:`rdiv` for integer arrays."""
    if den <= 0:
        raise ValueError("denominator must be positive")
    num = np.asarray(num)
    if num.dtype != object and num.size and int(np.abs(num).max()) >= _SAFE_INT64 // 4:
        num = num.astype(object)
    if num.dtype == object or den >= _SAFE_INT64 // 4:
        flat = [rdiv(int(v), den) for v in num.ravel()]
        return _as_int_array(flat).reshape(num.shape)
    mag = (2 * np.abs(num) + den) // (2 * den)
    return np.where(num >= 0, mag, -mag)


def _as_int_array(values) -> np.ndarray:
    values = list(values)
    if values and max(abs(int(v)) for v in values) > RAW_MAX:
        return np.array(values, dtype=object)
    return np.array(values, dtype=np.int64)


def _max_abs(a: np.ndarray) -> int:
    return int(np.abs(a).max()) if a.size else 0


def exact_matmul(a, b) -> np.ndarray:
    """Integer matrix product that never wraps around.

    Uses int64 when a worst-case bound on the accumulator fits, and Python
    integers otherwise.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    inner = a.shape[-1] if a.ndim else 1
    if a.dtype != object and b.dtype != object:
        if _max_abs(a) * _max_abs(b) * max(inner, 1) < _SAFE_INT64:
            return a.astype(np.int64) @ b.astype(np.int64)
    out = a.astype(object) @ b.astype(object)
    return np.asarray(out, dtype=object)


def exact_mul(a, b) -> np.ndarray:
    """Elementwise (broadcasting) integer product that never wraps around."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.dtype != object and b.dtype != object and _max_abs(a) * _max_abs(b) < _SAFE_INT64:
        return a.astype(np.int64) * b.astype(np.int64)
    return a.astype(object) * b.astype(object)


def _to_rational(x) -> Fraction:
    if isinstance(x, FixedPoint):
        return Fraction(x.raw, x.scale)
    if isinstance(x, (Integral, Rational)):
        return Fraction(x)
    if isinstance(x, Decimal):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(Decimal(x))
    xf = float(x)
    if not np.isfinite(xf):
        raise FixedPointRangeError(f"cannot quantize non-finite value {x!r}")
    return Fraction(*xf.as_integer_ratio())


def quantize_raw(x, scale: int) -> int:
    """Raw integer for ``x`` at ``scale``, rounded half away from zero.

    Floats are rounded from their exact binary value, so the result never
    depends on intermediate float products.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    q = _to_rational(x) * scale
    return _check_range(rdiv(q.numerator, q.denominator))


def quantize(x, scale: int = DEFAULT_SCALE) -> "FixedPoint":
    return FixedPoint(quantize_raw(x, scale), scale)


def quantize_array(xs, scale: int = DEFAULT_SCALE) -> np.ndarray:
    """Quantize an array of reals to an int64 array of raw values."""
    xs = np.asarray(xs, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise FixedPointRangeError("cannot quantize non-finite values")
    y = np.abs(xs) * scale
    if y.size and y.max() >= 2.0**62:
        raise FixedPointRangeError("value exceeds the fixed-point range")
    out = np.sign(xs) * np.floor(y + 0.5)
    # The float product can land on the wrong side of a .5 tie; redo those exactly.
    frac = y - np.floor(y)
    near = np.abs(frac - 0.5) < 1e-6 * np.maximum(1.0, y)
    for idx in zip(*np.nonzero(near)):
        out[idx] = quantize_raw(float(xs[idx]), scale)
    return out.astype(np.int64)


def dequantize(raw, scale: int):
    """Float view of raw values. For display and evaluation only."""
    if isinstance(raw, FixedPoint):
        return raw.raw / raw.scale
    if np.isscalar(raw):
        return int(raw) / scale
    return np.asarray(raw, dtype=float) / scale


@dataclass(frozen=True, order=True)
class FixedPoint:
    """A real number ``raw / scale``."""

    raw: int
    scale: int = DEFAULT_SCALE

    def __post_init__(self):
        object.__setattr__(self, "raw", _check_range(int(self.raw)))
        if int(self.scale) <= 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "scale", int(self.scale))

    def _same(self, other: "FixedPoint") -> None:
        if not isinstance(other, FixedPoint):
            raise TypeError(f"expected FixedPoint, got {type(other).__name__}")
        if other.scale != self.scale:
            raise ValueError(f"scale mismatch: {self.scale} vs {other.scale}")

    def __add__(self, other: "FixedPoint") -> "FixedPoint":
        self._same(other)
        return FixedPoint(self.raw + other.raw, self.scale)

    def __sub__(self, other: "FixedPoint") -> "FixedPoint":
        self._same(other)
        return FixedPoint(self.raw - other.raw, self.scale)

    def __mul__(self, other: "FixedPoint") -> "FixedPoint":
        self._same(other)
        return FixedPoint(rdiv(self.raw * other.raw, self.scale), self.scale)

    def __neg__(self) -> "FixedPoint":
        return FixedPoint(-self.raw, self.scale)

    def __abs__(self) -> "FixedPoint":
        return FixedPoint(abs(self.raw), self.scale)

    def __float__(self) -> float:
        return self.raw / self.scale

    def to_json(self) -> dict:
        return {"raw": self.raw, "scale": self.scale}

    @classmethod
    def from_json(cls, obj: dict) -> "FixedPoint":
        return cls(int(obj["raw"]), int(obj["scale"]))


def fp_dot(a, b) -> FixedPoint:
    """Dot product of two FixedPoint vectors, rounded once at the end."""
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("empty vectors")
    scale = a[0].scale
    if any(v.scale != scale for v in a + b):
        raise ValueError("all entries must share one scale")
    acc = sum(u.raw * v.raw for u, v in zip(a, b))
    return FixedPoint(rdiv(acc, scale), scale)


def dot_raw(a, b, scale: int) -> int:
    """Raw-array form of :func:`fp_dot`."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    acc = sum(int(u) * int(v) for u, v in zip(a.tolist(), b.tolist()))
    return _check_range(rdiv(acc, scale))


def vector_to_json(raw, scale: int) -> dict:
    return {"raw": [int(v) for v in np.asarray(raw).ravel().tolist()], "scale": int(scale)}


def vector_from_json(obj: dict, expected_scale: int | None = None) -> np.ndarray:
    scale = int(obj["scale"])
    if expected_scale is not None and scale != expected_scale:
        raise ValueError(f"scale mismatch: {scale} vs {expected_scale}")
    return np.array([_check_range(int(v)) for v in obj["raw"]], dtype=np.int64)


@dataclass(frozen=True)
class FieldElement:
    """Integer modulo :data:`FIELD_PRIME`; always stored reduced."""

    value: int

    def __post_init__(self):
        object.__setattr__(self, "value", int(self.value) % FIELD_PRIME)

    def __add__(self, other: "FieldElement | int") -> "FieldElement":
        o = other.value if isinstance(other, FieldElement) else int(other)
        return FieldElement(self.value + o)

    __radd__ = __add__

    def __sub__(self, other: "FieldElement | int") -> "FieldElement":
        o = other.value if isinstance(other, FieldElement) else int(other)
        return FieldElement(self.value - o)

    def __mul__(self, other: "FieldElement | int") -> "FieldElement":
        o = other.value if isinstance(other, FieldElement) else int(other)
        return FieldElement(self.value * o)

    __rmul__ = __mul__

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(32, "big")

    def hex(self) -> str:
        return f"{self.value:064x}"

    @classmethod
    def from_hex(cls, s: str) -> "FieldElement":
        v = int(s, 16)
        if v >= FIELD_PRIME:
            raise ValueError("field element out of range")
        return cls(v)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FieldElement":
        return cls(int.from_bytes(data, "big"))
