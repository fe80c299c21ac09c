"""Two-phase protocol: commit once, then answer queries with certificates.

Offline, :func:`setup` commits to the model weights and to the prover's
randomness ``r_p`` and publishes a :class:`PublicBundle`. Online, the
verifier sends a fresh ``r_v``; :func:`prove` runs the explanation with
the PRF key ``r_p + r_v`` and returns ``(o, e, certificate)``;
:func:`verify` checks the certificate against the bundle and the query.

The only backend is :class:`ReplayBackend`, which "proves" by disclosing
the witness and re-running the relation checker. It is sound and complete
but hides nothing, including the weights.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import LimeConfig
from .crypto import Commitment, PrfKey, commit, decompose, digests_needed, hash_stream, uniform_samples
from .lasso import Explanation, LassoCertificateError, LassoConvergenceError
from .lime import explain
from .model import ModelWeights
from .numeric import FIELD_PRIME, FieldElement, vector_to_json
from .relation import CheckReport, Statement, Witness, check_relation, r_p_message

PROTOCOL_VERSION = 1
BUNDLE_FORMAT = "expproof-bundle"
CERT_FORMAT = "expproof-cert"


class ProverError(RuntimeError):
    """The prover could not produce a certificate that passes its own check."""


@dataclass(frozen=True, eq=False)
class PublicBundle:
    com_W: Commitment
    com_r: Commitment
    cfg: LimeConfig
    version: int = PROTOCOL_VERSION

    def to_dict(self) -> dict:
        return {
            "format": BUNDLE_FORMAT,
            "version": self.version,
            "com_W": self.com_W.hex(),
            "com_r": self.com_r.hex(),
            "cfg": self.cfg.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PublicBundle":
        if obj.get("format") != BUNDLE_FORMAT:
            raise ValueError(f"not a public bundle (format {obj.get('format')!r})")
        return cls(Commitment.from_hex(obj["com_W"]), Commitment.from_hex(obj["com_r"]),
                   LimeConfig.from_dict(obj["cfg"]), int(obj["version"]))

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True, eq=False)
class ProverState:
    model: ModelWeights
    r_p: FieldElement
    rho_W: bytes
    rho_r: bytes
    com_W: Commitment
    com_r: Commitment
    cfg: LimeConfig

    @property
    def bundle(self) -> PublicBundle:
        return PublicBundle(self.com_W, self.com_r, self.cfg)

    def to_dict(self) -> dict:
        """Secret prover state. Never hand this to a verifier."""
        return {
            "format": "expproof-prover-state",
            "version": PROTOCOL_VERSION,
            "model": self.model.to_dict(),
            "r_p": self.r_p.hex(),
            "rho_W": self.rho_W.hex(),
            "rho_r": self.rho_r.hex(),
            "cfg": self.cfg.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ProverState":
        model = ModelWeights.from_dict(obj["model"])
        r_p = FieldElement.from_hex(obj["r_p"])
        rho_W, rho_r = bytes.fromhex(obj["rho_W"]), bytes.fromhex(obj["rho_r"])
        cfg = LimeConfig.from_dict(obj["cfg"])
        return cls(model, r_p, rho_W, rho_r, commit(model.canonical_bytes(), rho_W),
                   commit(r_p_message(r_p), rho_r), cfg)


def _expand(entropy: bytes, label: bytes, size: int) -> bytes:
    return hashlib.blake2b(entropy, digest_size=size, person=b"expproof-setup1", salt=label.ljust(16, b"\0")).digest()


def setup(model: ModelWeights, cfg: LimeConfig, entropy: bytes | None = None) -> tuple[ProverState, PublicBundle]:
    """Offline phase: draw ``r_p`` and blindings, commit, publish.

    With ``entropy`` everything is derived from it deterministically;
    otherwise fresh OS randomness is used.
    """
    if model.scale != cfg.scale:
        raise ValueError(f"model scale {model.scale} differs from config scale {cfg.scale}")
    if entropy is None:
        entropy = secrets.token_bytes(64)
    # 64 bytes reduced mod P: the bias is below 2**-250
    r_p = FieldElement(int.from_bytes(_expand(entropy, b"r_p", 64), "big"))
    rho_W = _expand(entropy, b"rho_W", 32)
    rho_r = _expand(entropy, b"rho_r", 32)
    state = ProverState(model, r_p, rho_W, rho_r, commit(model.canonical_bytes(), rho_W),
                        commit(r_p_message(r_p), rho_r), cfg)
    return state, state.bundle


def random_challenge() -> FieldElement:
    """Verifier randomness for one query."""
    return FieldElement(secrets.randbelow(FIELD_PRIME))


def derive_challenge(bundle: PublicBundle, x) -> FieldElement:
    """Non-interactive challenge hashed from the bundle and the query.

    Weaker than a verifier-chosen ``r_v``: the prover can grind over
    queries. Meant for batch evaluation only.
    """
    h = hashlib.blake2b(digest_size=64, person=b"expproof-chal-v1")
    h.update(bundle.canonical_bytes())
    h.update(json.dumps(vector_to_json(x, bundle.cfg.scale), sort_keys=True).encode())
    return FieldElement(int.from_bytes(h.digest(), "big"))


class ProofBackend(ABC):
    name: str

    @abstractmethod
    def prove(self, stmt: Statement, wit: Witness) -> bytes:
        ...

    @abstractmethod
    def check(self, stmt: Statement, proof: bytes) -> CheckReport:
        ...

    def verify(self, stmt: Statement, proof: bytes) -> bool:
        return self.check(stmt, proof).accepted


class ReplayBackend(ProofBackend):
    """Proof = canonical witness bytes; verification = the relation checker."""

    name = "replay"

    def prove(self, stmt: Statement, wit: Witness) -> bytes:
        return wit.canonical_bytes()

    def check(self, stmt: Statement, proof: bytes) -> CheckReport:
        try:
            wit = Witness.from_dict(json.loads(proof))
        except (ValueError, KeyError, TypeError) as exc:
            report = CheckReport()
            report.fail("structure", f"witness does not decode: {exc}")
            return report
        return check_relation(stmt, wit)


BACKENDS: dict[str, ProofBackend] = {"replay": ReplayBackend()}


@dataclass(frozen=True, eq=False)
class Certificate:
    stmt: Statement
    proof: bytes
    backend: str = "replay"
    version: int = PROTOCOL_VERSION

    @property
    def witness(self) -> Witness:
        """Decoded witness (replay backend only)."""
        if self.backend != "replay":
            raise ValueError(f"backend {self.backend!r} carries no witness")
        return Witness.from_dict(json.loads(self.proof))

    def to_dict(self) -> dict:
        out = {"format": CERT_FORMAT, "version": self.version, "backend": self.backend,
               "statement": self.stmt.to_dict()}
        if self.backend == "replay":
            out["witness"] = json.loads(self.proof)
        else:
            out["proof"] = self.proof.hex()
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "Certificate":
        if obj.get("format") != CERT_FORMAT:
            raise ValueError(f"not a certificate (format {obj.get('format')!r})")
        backend = obj["backend"]
        if backend == "replay":
            proof = json.dumps(obj["witness"], sort_keys=True, separators=(",", ":")).encode()
        else:
            proof = bytes.fromhex(obj["proof"])
        return cls(Statement.from_dict(obj["statement"]), proof, backend, int(obj["version"]))

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()


def sample_stream(r_p: FieldElement, r_v: FieldElement, cfg: LimeConfig, d: int):
    """PRF digests, their limb decompositions and the flat sample stream."""
    count = cfg.samples_needed(d)
    h = hash_stream(PrfKey.derive(r_p, r_v), digests_needed(count, cfg.b))
    parts = [decompose(t, cfg.b) for t in h]
    limbs = np.array([p[0] for p in parts], dtype=np.int64)
    rem = np.array([p[1] for p in parts], dtype=np.int64)
    return h, limbs, rem, uniform_samples(h, cfg.b, count)


def prove(state: ProverState, x, r_v: FieldElement, backend: ProofBackend | None = None,
          timings: dict | None = None) -> tuple[int, Explanation, Certificate]:
    """Online phase, prover side. Never returns a certificate that fails."""
    backend = backend or BACKENDS["replay"]
    cfg = state.cfg
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (state.model.input_dim,):
        raise ValueError(f"input has shape {x.shape}, model expects ({state.model.input_dim},)")
    t0 = time.perf_counter()
    h, limbs, rem, samples = sample_stream(state.r_p, r_v, cfg, len(x))
    t1 = time.perf_counter()
    try:
        res = explain(x, state.model, cfg, samples)
    except (LassoCertificateError, LassoConvergenceError) as exc:
        raise ProverError(f"no certificate for this query: {exc}") from exc
    stmt = Statement(cfg, x, res.label, res.explanation, r_v, state.com_W, state.com_r)
    wit = Witness(state.model, state.r_p, state.rho_W, state.rho_r, res.neighborhood.y, tuple(h), limbs, rem,
                  res.neighborhood.pi, res.lasso.w_hat, res.lasso.intercept, res.lasso.v_hat, res.x_border)
    t2 = time.perf_counter()
    report = check_relation(stmt, wit)
    t3 = time.perf_counter()
    if not report.accepted:
        raise ProverError("self-check failed:\n" + report.summary())
    cert = Certificate(stmt, backend.prove(stmt, wit), backend.name)
    if timings is not None:
        timings.update({"hash": t1 - t0, **res.timings, "self_check": t3 - t2, "total": time.perf_counter() - t0})
    return res.label, res.explanation, cert


def verify(bundle: PublicBundle, x, r_v: FieldElement, o: int, e: Explanation, cert: Certificate) -> CheckReport:
    """Online phase, verifier side: bind the certificate to this query, then check it."""
    report = CheckReport()
    if bundle.version != PROTOCOL_VERSION or cert.version != PROTOCOL_VERSION:
        report.fail("version", f"protocol version mismatch (bundle {bundle.version}, certificate {cert.version}, "
                               f"expected {PROTOCOL_VERSION})")
        return report
    backend = BACKENDS.get(cert.backend)
    if backend is None:
        report.fail("version", f"unknown proof backend {cert.backend!r}")
        return report
    stmt = cert.stmt
    x = np.asarray(x, dtype=np.int64)
    checks = [
        ("x", np.array_equal(stmt.x, x)),
        ("r_v", stmt.r_v == r_v),
        ("o", int(stmt.o) == int(o)),
        ("e", stmt.e == e),
        ("com_W", stmt.com_W == bundle.com_W),
        ("com_r", stmt.com_r == bundle.com_r),
        ("cfg", stmt.cfg == bundle.cfg),
    ]
    for name, ok in checks:
        if not ok:
            report.fail("binding", f"certificate {name} differs from the presented value")
    if report.failures:
        return report
    return backend.check(stmt, cert.proof)


def _read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None


def _write_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def load_bundle(path) -> PublicBundle:
    try:
        return PublicBundle.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def load_certificate(path) -> Certificate:
    try:
        return Certificate.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def load_prover_state(path) -> ProverState:
    try:
        return ProverState.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def save_bundle(bundle: PublicBundle, path) -> None:
    _write_json(bundle.to_dict(), path)


def save_certificate(cert: Certificate, path) -> None:
    _write_json(cert.to_dict(), path)


def save_prover_state(state: ProverState, path) -> None:
    _write_json(state.to_dict(), path)
