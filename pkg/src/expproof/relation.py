"""Deterministic checker for the explanation relation.

A :class:`Statement` is what both parties see; a :class:`Witness` is what
the prover knows. :func:`check_relation` re-executes every step of the
explanation pipeline from the witness and accepts iff all of them agree:

1. commitment openings (``com_r``, ``com_W``) and the claimed output ``o``
2. PRF digests under ``k = r_p + r_v``
3. limb decomposition of every digest, with range checks
4. the border point (BorderLIME only), re-derived by grid search
5. kernel weights of the regenerated neighborhood
6. labels of every neighborhood point
7. LASSO duality gap and dual feasibility, in exact fixed point
8. the top-K explanation against the sorted coefficients

Value failures accumulate; only a malformed witness short-circuits.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import LimeConfig
from .crypto import Commitment, PrfKey, decompose, digests_needed, hash_stream, limbs_per_digest, recompose, verify_commitment
from .lasso import Explanation, duality_gap, dual_correlations, top_k, weighted_design
from .lime import border_grid_search, border_steps, kernel_weights, perturb
from .model import ModelWeights, infer, infer_batch
from .numeric import FieldElement, quantize_raw, vector_from_json, vector_to_json

CHECKS = ("structure", "com_r", "com_W", "output", "hash", "limbs", "border",
          "kernel", "labels", "lasso_gap", "lasso_dual", "top_k")


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def r_p_message(r_p: FieldElement) -> bytes:
    """Commitment preimage for the prover's randomness."""
    return r_p.to_bytes()


@dataclass(frozen=True, eq=False)
class Statement:
    cfg: LimeConfig
    x: np.ndarray
    o: int
    e: Explanation
    r_v: FieldElement
    com_W: Commitment
    com_r: Commitment

    def to_dict(self) -> dict:
        return {
            "cfg": self.cfg.to_dict(),
            "x": vector_to_json(self.x, self.cfg.scale),
            "o": int(self.o),
            "e": self.e.to_json(),
            "r_v": self.r_v.hex(),
            "com_W": self.com_W.hex(),
            "com_r": self.com_r.hex(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Statement":
        cfg = LimeConfig.from_dict(obj["cfg"])
        return cls(
            cfg,
            vector_from_json(obj["x"], cfg.scale),
            int(obj["o"]),
            Explanation.from_json(obj["e"]),
            FieldElement.from_hex(obj["r_v"]),
            Commitment.from_hex(obj["com_W"]),
            Commitment.from_hex(obj["com_r"]),
        )

    def canonical_bytes(self) -> bytes:
        return _canonical(self.to_dict())

    def __eq__(self, other) -> bool:
        return isinstance(other, Statement) and self.canonical_bytes() == other.canonical_bytes()

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Witness:
    model: ModelWeights
    r_p: FieldElement
    rho_W: bytes
    rho_r: bytes
    y: np.ndarray  # (n,) labels
    h: tuple[FieldElement, ...]  # N digests
    limbs: np.ndarray  # (N, B)
    rem: np.ndarray  # (N,)
    pi: np.ndarray  # (n,) raw kernel weights
    w_hat: np.ndarray
    intercept: int
    v_hat: np.ndarray
    x_border: np.ndarray | None = None

    def to_dict(self) -> dict:
        S = self.model.scale
        return {
            "model": self.model.to_dict(),
            "r_p": self.r_p.hex(),
            "rho_W": self.rho_W.hex(),
            "rho_r": self.rho_r.hex(),
            "y": [int(t) for t in np.asarray(self.y).tolist()],
            "h": [t.hex() for t in self.h],
            "limbs": np.asarray(self.limbs, dtype=np.int64).tolist(),
            "rem": [int(t) for t in np.asarray(self.rem).tolist()],
            "pi": vector_to_json(self.pi, S),
            "w_hat": vector_to_json(self.w_hat, S),
            "intercept": {"raw": int(self.intercept), "scale": S},
            "v_hat": vector_to_json(self.v_hat, S),
            "x_border": None if self.x_border is None else vector_to_json(self.x_border, S),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Witness":
        model = ModelWeights.from_dict(obj["model"])
        S = model.scale
        if int(obj["intercept"]["scale"]) != S:
            raise ValueError("intercept scale differs from the model scale")
        limbs = np.array(obj["limbs"], dtype=np.int64)
        if limbs.ndim != 2:
            limbs = limbs.reshape(len(obj["limbs"]), -1)
        return cls(
            model,
            FieldElement.from_hex(obj["r_p"]),
            bytes.fromhex(obj["rho_W"]),
            bytes.fromhex(obj["rho_r"]),
            np.array(obj["y"], dtype=np.int64),
            tuple(FieldElement.from_hex(t) for t in obj["h"]),
            limbs,
            np.array(obj["rem"], dtype=np.int64),
            vector_from_json(obj["pi"], S),
            vector_from_json(obj["w_hat"], S),
            int(obj["intercept"]["raw"]),
            vector_from_json(obj["v_hat"], S),
            None if obj.get("x_border") is None else vector_from_json(obj["x_border"], S),
        )

    def canonical_bytes(self) -> bytes:
        return _canonical(self.to_dict())

    def __eq__(self, other) -> bool:
        return isinstance(other, Witness) and self.canonical_bytes() == other.canonical_bytes()

    __hash__ = None


@dataclass
class CheckReport:
    failures: list[tuple[str, str]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return not self.failures

    @property
    def failed_checks(self) -> list[str]:
        return [c for c, _ in self.failures]

    def fail(self, check: str, message: str) -> None:
        self.failures.append((check, message))

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "failures": [{"check": c, "message": m} for c, m in self.failures],
            "timings": {k: round(v, 6) for k, v in self.timings.items()},
        }

    def summary(self) -> str:
        if self.accepted:
            return "ACCEPT"
        return "REJECT\n" + "\n".join(f"  [{c}] {m}" for c, m in self.failures)


def _structure_problems(stmt: Statement, wit: Witness) -> list[str]:
    cfg = stmt.cfg
    out = []
    S = cfg.scale
    if wit.model.scale != S:
        out.append(f"model scale {wit.model.scale} != config scale {S}")
    if stmt.e.scale != S:
        out.append(f"explanation scale {stmt.e.scale} != config scale {S}")
    x = np.asarray(stmt.x)
    d = wit.model.input_dim
    if x.shape != (d,):
        out.append(f"input has shape {x.shape}, model expects ({d},)")
    if not 1 <= cfg.K <= d:
        out.append(f"K={cfg.K} outside [1, {d}]")
    if len(stmt.e.entries) != cfg.K:
        out.append(f"explanation has {len(stmt.e.entries)} entries, expected K={cfg.K}")
    n_dig = digests_needed(cfg.samples_needed(d), cfg.b)
    per = limbs_per_digest(cfg.b)
    shapes = {
        "y": (np.asarray(wit.y).shape, (cfg.n,)),
        "pi": (np.asarray(wit.pi).shape, (cfg.n,)),
        "v_hat": (np.asarray(wit.v_hat).shape, (cfg.n,)),
        "w_hat": (np.asarray(wit.w_hat).shape, (d,)),
        "limbs": (np.asarray(wit.limbs).shape, (n_dig, per)),
        "rem": (np.asarray(wit.rem).shape, (n_dig,)),
    }
    for name, (got, want) in shapes.items():
        if got != want:
            out.append(f"{name} has shape {got}, expected {want}")
    if len(wit.h) != n_dig:
        out.append(f"{len(wit.h)} digests supplied, expected {n_dig}")
    if cfg.border_lime != (wit.x_border is not None):
        out.append("border point must be present exactly when border_lime is set")
    elif wit.x_border is not None and np.asarray(wit.x_border).shape != (d,):
        out.append(f"border point has shape {np.asarray(wit.x_border).shape}, expected ({d},)")
    if any(int(t) not in (0, 1) for t in np.asarray(wit.y).ravel().tolist()):
        out.append("labels must be 0 or 1")
    if int(stmt.o) not in (0, 1):
        out.append("output must be 0 or 1")
    return out


class _Runner:
    def __init__(self, report: CheckReport):
        self.report = report

    def __call__(self, check: str, fn) -> None:
        t0 = time.perf_counter()
        try:
            msg = fn()
        except (ValueError, IndexError, KeyError, TypeError, OverflowError) as exc:
            msg = f"check raised {type(exc).__name__}: {exc}"
        self.report.timings[check] = time.perf_counter() - t0
        if msg:
            self.report.fail(check, msg)


def check_relation(stmt: Statement, wit: Witness) -> CheckReport:
    """Accept iff ``(stmt, wit)`` satisfies every condition of the relation.

    Pure and integer-only. Later checks run on values the checker derived
    itself (digests from the key, border point from the grid search), so a
    bad witness entry is reported at its own check and nowhere else when
    possible.
    """
    report = CheckReport()
    run = _Runner(report)
    cfg = stmt.cfg
    S = cfg.scale

    try:
        problems = _structure_problems(stmt, wit)
    except (ValueError, TypeError, AttributeError) as exc:
        problems = [f"malformed input: {exc}"]
    if problems:
        for p in problems:
            report.fail("structure", p)
        return report

    x = np.asarray(stmt.x, dtype=np.int64)
    d = x.shape[0]
    model = wit.model

    run("com_r", lambda: None if verify_commitment(stmt.com_r, r_p_message(wit.r_p), wit.rho_r)
        else "com_r does not open to r_p")
    run("com_W", lambda: None if verify_commitment(stmt.com_W, model.canonical_bytes(), wit.rho_W)
        else "com_W does not open to the witness weights")
    run("output", lambda: None if infer(model, x) == int(stmt.o)
        else f"claimed output {stmt.o} differs from inference")

    key = PrfKey.derive(wit.r_p, stmt.r_v)
    n_dig = len(wit.h)
    ref_h = hash_stream(key, n_dig)

    def check_hash():
        bad = [i for i, (a, b) in enumerate(zip(wit.h, ref_h)) if a != b]
        if bad:
            return f"{len(bad)} digest(s) differ from the PRF under k = r_p + r_v (first at index {bad[0]})"

    run("hash", check_hash)

    limbs = np.asarray(wit.limbs, dtype=np.int64)
    rem = np.asarray(wit.rem, dtype=np.int64)

    def check_limbs():
        top = 1 << cfg.b
        if limbs.min() < 0 or limbs.max() >= top:
            i, k = np.argwhere((limbs < 0) | (limbs >= top))[0]
            return f"limb ({i}, {k}) = {limbs[i, k]} outside [0, 2^{cfg.b})"
        if rem.min() < 0 or rem.max() >= top:
            return f"remainder outside [0, 2^{cfg.b})"
        for i, h in enumerate(wit.h):
            if recompose(limbs[i], int(rem[i]), cfg.b) != h.value:
                return f"limbs of digest {i} do not recompose to it"

    run("limbs", check_limbs)

    ref_limbs = []
    for h in ref_h:
        ref_limbs.extend(decompose(h, cfg.b)[0])
    samples = np.array(ref_limbs[: cfg.samples_needed(d)], dtype=np.int64)

    center = x
    if cfg.border_lime:
        steps = border_steps(samples, d, cfg)
        derived = border_grid_search(x, model, steps, cfg.vector_length)

        def check_border():
            if not np.array_equal(derived, np.asarray(wit.x_border, dtype=np.int64)):
                return "border point differs from the grid-search result"

        run("border", check_border)
        center = derived
        samples = samples[cfg.m * d:]

    z = perturb(center, samples, cfg)

    def check_kernel():
        ref = kernel_weights(center, z, cfg)
        bad = np.nonzero(ref != np.asarray(wit.pi))[0]
        if bad.size:
            return f"{bad.size} kernel weight(s) differ from the table (first at sample {bad[0]})"

    run("kernel", check_kernel)

    def check_labels():
        bad = np.nonzero(infer_batch(model, z) != np.asarray(wit.y))[0]
        if bad.size:
            return f"{bad.size} label(s) differ from inference (first at sample {bad[0]})"

    run("labels", check_labels)

    alpha_raw = quantize_raw(cfg.alpha, S)
    eps_raw = quantize_raw(cfg.epsilon, S)
    X, yp = weighted_design(z, np.asarray(wit.y, dtype=np.int64) * S, wit.pi, S)

    def check_gap():
        p, dv, gap = duality_gap(X, yp, wit.intercept, wit.w_hat, wit.v_hat, alpha_raw, S)
        if gap > eps_raw:
            return f"duality gap {gap}/{S} exceeds epsilon {eps_raw}/{S} (p={p}, d={dv})"

    run("lasso_gap", check_gap)

    def check_dual():
        f = np.asarray(dual_correlations(X, wit.v_hat), dtype=object)
        limit = alpha_raw * S
        bad = [j for j, t in enumerate(f.tolist()) if abs(int(t)) > limit]
        if bad:
            return f"|X^T v|_j exceeds alpha for feature(s) {bad}"

    run("lasso_dual", check_dual)

    def check_top_k():
        ref = top_k(wit.w_hat, cfg.K, S).entries
        for rank, (got, want) in enumerate(zip(stmt.e.entries, ref)):
            if tuple(int(t) for t in got) != want:
                return f"explanation entry {rank} is {tuple(got)}, sorted coefficients give {want}"

    run("top_k", check_top_k)
    return report


@dataclass(frozen=True, eq=False)
class Tamper:
    name: str
    expected: str
    stmt: Statement
    wit: Witness


def _bump_model(model: ModelWeights) -> ModelWeights:
    d = model.to_dict()
    if model.kind == "mlp":
        d["layers"][0]["weight"][0][0] += 1
    else:
        d["trees"][0]["threshold"][0] += 1
    return ModelWeights.from_dict(d)


def enumerate_tampers(stmt: Statement, wit: Witness, seed: int = 0) -> list[Tamper]:
    """Single-point corruptions of an honest pair, each tagged with the check
    that must catch it. ``seed`` picks which coordinates get corrupted."""
    rng = np.random.default_rng(seed)
    cfg = stmt.cfg
    n = cfg.n
    S = cfg.scale
    out: list[Tamper] = []

    def add(name, expected, stmt_=stmt, **wit_changes):
        out.append(Tamper(name, expected, stmt_, replace(wit, **wit_changes) if wit_changes else wit))

    add("wrong_weights", "com_W", model=_bump_model(wit.model))
    add("wrong_r_p", "com_r", r_p=wit.r_p + 1)
    rho = bytearray(wit.rho_W)
    rho[int(rng.integers(len(rho)))] ^= 0x01
    add("recommit_W_other_rho", "com_W", rho_W=bytes(rho))
    other = Commitment(bytes(b ^ 0xFF for b in stmt.com_W.digest))
    add("mismatched_commitment", "com_W", replace(stmt, com_W=other))
    add("wrong_output", "output", replace(stmt, o=1 - int(stmt.o)))

    h = list(wit.h)
    i = int(rng.integers(len(h)))
    h[i] = h[i] + 1
    add("wrong_hash", "hash", h=tuple(h))

    limbs = np.array(wit.limbs, dtype=np.int64)
    per = limbs.shape[1]
    i = int(rng.integers(limbs.shape[0]))
    k = int(rng.integers(per - 1)) if per > 1 else 0
    if per > 1:
        # same digest value, but limb k overflows its range
        limbs[i, k] += 1 << cfg.b
        limbs[i, k + 1] -= 1
    else:
        limbs[i, k] += 1 << cfg.b
    add("limb_out_of_range", "limbs", limbs=limbs)

    y = np.array(wit.y)
    i = int(rng.integers(n))
    y[i] = 1 - y[i]
    add("wrong_label", "labels", y=y)

    pi = np.array(wit.pi)
    i = int(rng.integers(n))
    pi[i] = pi[i] + 1 if pi[i] < S else pi[i] - 1
    add("wrong_kernel_weight", "kernel", pi=pi)

    add("infeasible_dual", "lasso_dual", v_hat=np.asarray(wit.v_hat, dtype=np.int64) * 1000 + 10**6)
    add("oversized_gap", "lasso_gap", intercept=int(wit.intercept) + S // 5)

    w = np.asarray(wit.w_hat, dtype=np.int64)
    lead = stmt.e.entries[0][0]
    diff = [j for j in range(len(w)) if w[j] != w[lead]]
    w2 = w.copy()
    if diff:
        j = diff[int(rng.integers(len(diff)))]
        w2[lead], w2[j] = w[j], w[lead]
    else:
        # all coefficients equal: lift one past the leader instead
        j = (lead + 1 + int(rng.integers(len(w) - 1))) % len(w) if len(w) > 1 else lead
        w2[j] = abs(int(w[lead])) + 1
    add("reorder_w_hat", "top_k", w_hat=w2)

    entries = list(stmt.e.entries)
    if len(entries) > 1:
        entries[0], entries[1] = entries[1], entries[0]
    else:
        entries[0] = (entries[0][0], entries[0][1] + 1)
    add("wrong_top_k_order", "top_k", replace(stmt, e=Explanation(tuple(entries), stmt.e.scale)))

    if wit.x_border is not None:
        xb = np.array(wit.x_border, dtype=np.int64)
        xb[int(rng.integers(len(xb)))] += 1
        add("wrong_border_point", "border", x_border=xb)

    add("truncated_labels", "structure", y=np.asarray(wit.y)[:-1])
    return out
