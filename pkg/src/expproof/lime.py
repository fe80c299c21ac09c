"""LIME and BorderLIME over a deterministic sample stream.

All geometry is raw fixed point. The sample stream is a flat array of
``b``-bit integers (PRF limbs); BorderLIME consumes the first ``m * d`` of
them as direction seeds and the neighborhood uses the next ``n * d``.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .config import LimeConfig
from .crypto import LookupTable, gaussian_samples, lookup_eval
from .lasso import Explanation, LassoSolution, certify_lasso, top_k, weighted_design
from .model import ModelWeights, infer, infer_batch
from .numeric import FixedPoint, exact_matmul, rdiv_array


@dataclass(frozen=True, eq=False)
class Neighborhood:
    center: np.ndarray  # (d,) raw
    z: np.ndarray  # (n, d) raw
    y: np.ndarray  # (n,) labels
    pi: np.ndarray  # (n,) raw kernel weights


@dataclass(eq=False)
class ExplainResult:
    label: int
    explanation: Explanation
    neighborhood: Neighborhood
    lasso: LassoSolution
    x_border: np.ndarray | None
    timings: dict = field(default_factory=dict)


@contextmanager
def _timed(timings: dict, key: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        timings[key] = timings.get(key, 0.0) + time.perf_counter() - t0


def perturb(center, samples, cfg: LimeConfig) -> np.ndarray:
    """Neighborhood points ``center + offset(sample)``, one row per ``d`` samples."""
    center = np.asarray(center, dtype=np.int64)
    d = center.shape[0]
    s = np.asarray(samples, dtype=np.int64)
    if s.size < cfg.n * d:
        raise ValueError(f"need {cfg.n * d} samples for the neighborhood, got {s.size}")
    s = s[: cfg.n * d].reshape(cfg.n, d)
    if cfg.smpl_type == "uniform":
        half = 1 << (cfg.b - 1)
        offset = rdiv_array((s - half) * cfg.raw("half_edge"), half)
    else:
        g = gaussian_samples(s, cfg.gauss_table())
        offset = rdiv_array(g * cfg.raw("gauss_std"), cfg.scale)
    return center[None, :] + offset


def kernel_keys(center, z, sigma_raw: int, scale: int) -> np.ndarray:
    """Raw exp-table keys ``-||z - center||^2 / sigma^2``."""
    diff = np.asarray(z, dtype=np.int64) - np.asarray(center, dtype=np.int64)[None, :]
    dist2 = exact_matmul(diff * diff, np.ones(diff.shape[1], dtype=np.int64)) if diff.size else np.zeros(len(diff), dtype=np.int64)
    return -rdiv_array(np.asarray(dist2, dtype=object) * scale, sigma_raw * sigma_raw).astype(np.int64)


def exponential_kernel(x, z, sigma: FixedPoint, table: LookupTable) -> FixedPoint:
    """Similarity ``exp(-||x - z||^2 / sigma^2)`` read from the exp table."""
    key = int(kernel_keys(x, np.asarray(z)[None, :], sigma.raw, sigma.scale)[0])
    return lookup_eval(table, FixedPoint(key, sigma.scale))


def kernel_weights(center, z, cfg: LimeConfig) -> np.ndarray:
    if cfg.krnl_type == "none":
        return np.full(len(z), cfg.scale, dtype=np.int64)
    keys = kernel_keys(center, z, cfg.sigma_raw(len(center)), cfg.scale)
    return cfg.exp_table().lookup(keys)


def build_neighborhood(x, cfg: LimeConfig, samples, model: ModelWeights) -> Neighborhood:
    x = np.asarray(x, dtype=np.int64)
    z = perturb(x, samples, cfg)
    return Neighborhood(x, z, infer_batch(model, z), kernel_weights(x, z, cfg))


def border_steps(samples, d: int, cfg: LimeConfig) -> np.ndarray:
    """``m`` step vectors of length ~``delta`` from the first ``m*d`` samples.

    Samples go through the inverse-CDF table (isotropic directions) and are
    normalized with the reciprocal-square-root table.
    """
    s = np.asarray(samples, dtype=np.int64)[: cfg.m * d]
    if s.size < cfg.m * d:
        raise ValueError(f"need {cfg.m * d} samples for border directions, got {s.size}")
    g = gaussian_samples(s, cfg.gauss_table()).reshape(cfg.m, d)
    return unit_steps(g, cfg)


def unit_steps(directions, cfg: LimeConfig) -> np.ndarray:
    """Scale raw direction vectors to length ``delta`` (up to table error)."""
    g = np.asarray(directions, dtype=np.int64)
    S = cfg.scale
    norm2 = rdiv_array(np.asarray(exact_matmul(g * g, np.ones(g.shape[1], dtype=np.int64)), dtype=object), S)
    inv = cfg.rsqrt_table().lookup(np.asarray(norm2, dtype=np.int64))
    unit = rdiv_array(g * inv[:, None], S)
    return rdiv_array(unit * cfg.raw("delta"), S).astype(np.int64)


def _select_border(x, steps, first_flip) -> np.ndarray:
    """Closest flipped point; ties in squared distance go to the lowest direction index."""
    best = None
    for i, k in enumerate(first_flip):
        if k is None:
            continue
        step = steps[i].astype(object) * k
        dist2 = int(sum(int(t) * int(t) for t in step))
        if best is None or dist2 < best[0]:
            best = (dist2, i, k)
    if best is None:
        return np.asarray(x, dtype=np.int64).copy()
    _, i, k = best
    return np.asarray(x, dtype=np.int64) + k * steps[i]


def find_opposite_point(x, model: ModelWeights, cfg: LimeConfig, steps) -> np.ndarray:
    """Line search for the nearest point with the opposite label.

    Walks ``x + k * step_i`` for ``k = 1..T`` along each step vector and
    stops at the first flip; returns ``x`` itself when no ray flips.
    """
    x = np.asarray(x, dtype=np.int64)
    label = infer(model, x)
    ks = np.arange(1, cfg.T + 1, dtype=np.int64)
    first_flip = []
    for step in np.asarray(steps, dtype=np.int64):
        pts = x[None, :] + ks[:, None] * step[None, :]
        hits = np.nonzero(infer_batch(model, pts) != label)[0]
        first_flip.append(int(ks[hits[0]]) if hits.size else None)
    return _select_border(x, np.asarray(steps, dtype=np.int64), first_flip)


def border_grid_search(x, model: ModelWeights, steps, vector_length: int) -> np.ndarray:
    """Grid form of the search: infer every ``x + k * step_i`` at once, then
    scan from the far end inward so the closest flip is kept."""
    x = np.asarray(x, dtype=np.int64)
    steps = np.asarray(steps, dtype=np.int64)
    m = steps.shape[0]
    label = infer(model, x)
    ks = np.arange(1, vector_length + 1, dtype=np.int64)
    grid = x[None, None, :] + ks[None, :, None] * steps[:, None, :]
    flips = (infer_batch(model, grid.reshape(m * vector_length, -1)) != label).reshape(m, vector_length)
    first_flip = [None] * m
    for k in range(vector_length, 0, -1):
        for i in range(m):
            if flips[i, k - 1]:
                first_flip[i] = k
    return _select_border(x, steps, first_flip)


def explain(x, model: ModelWeights, cfg: LimeConfig, samples) -> ExplainResult:
    """Full pipeline: border shift, neighborhood, kernel, certified LASSO, top-K."""
    x = np.asarray(x, dtype=np.int64)
    d = x.shape[0]
    if d != model.input_dim:
        raise ValueError(f"dimension mismatch: model expects {model.input_dim} features, got {d}")
    if cfg.K > d:
        raise ValueError(f"K={cfg.K} exceeds input dimension {d}")
    samples = np.asarray(samples, dtype=np.int64)
    need = cfg.samples_needed(d)
    if samples.size < need:
        raise ValueError(f"need {need} samples, got {samples.size}")
    timings: dict = {}
    label = infer(model, x)
    center = x
    x_border = None
    if cfg.border_lime:
        with _timed(timings, "border"):
            steps = border_steps(samples, d, cfg)
            x_border = find_opposite_point(x, model, cfg, steps)
        center = x_border
        samples = samples[cfg.m * d:]
    with _timed(timings, "sampling+kernel"):
        z = perturb(center, samples, cfg)
        pi = kernel_weights(center, z, cfg)
    with _timed(timings, "inference"):
        y = infer_batch(model, z)
    with _timed(timings, "lasso"):
        X, yp = weighted_design(z, y * cfg.scale, pi, cfg.scale)
        sol = certify_lasso(X, yp, cfg.alpha, cfg.epsilon, cfg.scale, cfg.max_sweeps)
        e = top_k(sol.w_hat, cfg.K, cfg.scale)
    return ExplainResult(label, e, Neighborhood(center, z, y, pi), sol, x_border, timings)


def linear_predict(lasso: LassoSolution, points) -> np.ndarray:
    """Explanation-as-classifier: 1 iff ``w . z + b >= 0.5``, exact."""
    pts = np.asarray(points, dtype=np.int64)
    S = lasso.scale
    score = exact_matmul(pts, lasso.w_hat).astype(object) + lasso.intercept * S
    return np.array([1 if 2 * int(t) >= S * S else 0 for t in score], dtype=np.int64)


def sweep_stability_radius(model: ModelWeights, inputs, cfg: LimeConfig, samples_for,
                           candidates=(0.01, 0.03, 0.05, 0.07, 0.1, 0.15)) -> float | None:
    """Smallest candidate radius at which every input finds an opposite-label point.

    ``samples_for(i)`` returns the direction samples used for input ``i``.
    Offline helper; not part of the protocol.
    """
    for delta in candidates:
        c = cfg.with_(delta=delta, border_lime=True)
        ok = True
        for i, x in enumerate(inputs):
            x = np.asarray(x, dtype=np.int64)
            xb = find_opposite_point(x, model, c, border_steps(samples_for(i), len(x), c))
            if np.array_equal(xb, x):
                ok = False
                break
        if ok:
            return delta
    return None
