"""Public LIME configuration shared by prover and verifier."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace

from .crypto import DIGEST_BITS, PRF_NAME, exp_table, gauss_inv_cdf_table, recip_sqrt_table
from .numeric import DEFAULT_SCALE, quantize_raw

SAMPLING_TYPES = ("uniform", "gaussian")
KERNEL_TYPES = ("exponential", "none")


@dataclass(frozen=True)
class LimeConfig:
    """Every knob of the explanation pipeline.

    Real-valued parameters are kept as plain numbers and quantized at
    ``scale`` when used. ``sigma=None`` means the LIME library default
    ``sqrt(d) * 0.75`` for a ``d``-feature input. The line search of
    BorderLIME walks ``T`` grid points of length ``delta`` along each of
    ``m`` directions (``vector_length`` and ``step_size`` are aliases).
    """

    smpl_type: str = "gaussian"
    krnl_type: str = "exponential"
    border_lime: bool = False
    sigma: float | None = None
    alpha: float = 0.01
    epsilon: float = 0.001
    n: int = 300
    K: int = 5
    b: int = 16
    scale: int = DEFAULT_SCALE
    half_edge: float = 0.2
    gauss_std: float = 0.2
    m: int = 5
    delta: float = 0.1
    T: int = 250
    gauss_tail: float = 4.0
    exp_lo: float = -20.0
    exp_size: int = 200_000
    rsqrt_lo: float = 0.001
    rsqrt_hi: float = 200.0
    rsqrt_size: int = 200_000
    prf: str = PRF_NAME
    digest_bits: int = DIGEST_BITS
    max_sweeps: int = 10_000

    def __post_init__(self):
        problems = []
        if self.smpl_type not in SAMPLING_TYPES:
            problems.append(f"smpl_type must be one of {SAMPLING_TYPES}, got {self.smpl_type!r}")
        if self.krnl_type not in KERNEL_TYPES:
            problems.append(f"krnl_type must be one of {KERNEL_TYPES}, got {self.krnl_type!r}")
        if self.n <= 0:
            problems.append("n must be positive")
        if self.K < 1:
            problems.append("K must be at least 1")
        for name in ("alpha", "epsilon", "half_edge", "gauss_std", "delta"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        if self.sigma is not None and not self.sigma > 0:
            problems.append("sigma must be positive")
        if self.scale <= 0:
            problems.append("scale must be positive")
        if not 2 <= self.b <= min(self.digest_bits, 24):
            problems.append(f"b must lie in [2, {min(self.digest_bits, 24)}]")
        if self.m < 1 or self.T < 1:
            problems.append("m and T must be at least 1")
        if self.prf != PRF_NAME or self.digest_bits != DIGEST_BITS:
            problems.append(f"only the {PRF_NAME} PRF with {DIGEST_BITS}-bit digests is available")
        if problems:
            raise ValueError("invalid LimeConfig: " + "; ".join(problems))

    @property
    def vector_length(self) -> int:
        return self.T

    @property
    def step_size(self) -> float:
        return self.delta

    @property
    def variant(self) -> str:
        tag = f"{self.smpl_type[0].upper()}+{'E' if self.krnl_type == 'exponential' else 'N'}"
        return f"Border:{tag}" if self.border_lime else tag

    def raw(self, name: str) -> int:
        return quantize_raw(getattr(self, name), self.scale)

    def sigma_for(self, d: int) -> float:
        return self.sigma if self.sigma is not None else math.sqrt(d) * 0.75

    def sigma_raw(self, d: int) -> int:
        return quantize_raw(self.sigma_for(d), self.scale)

    def samples_needed(self, d: int) -> int:
        return (self.m * d if self.border_lime else 0) + self.n * d

    def exp_table(self):
        return exp_table(self.scale, self.exp_lo, self.exp_size)

    def gauss_table(self):
        return gauss_inv_cdf_table(self.b, self.scale, self.gauss_tail)

    def rsqrt_table(self):
        return recip_sqrt_table(self.scale, self.rsqrt_lo, self.rsqrt_hi, self.rsqrt_size)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "LimeConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**obj)

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()

    def with_(self, **changes) -> "LimeConfig":
        return replace(self, **changes)


def load_config(path) -> LimeConfig:
    from pathlib import Path

    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return LimeConfig.from_dict(obj)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None
