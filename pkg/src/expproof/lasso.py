"""Weighted LASSO with a fixed-point duality-gap certificate.

The checked problem, over coefficients ``w`` and an unpenalized intercept
``b``, is::

    primal  p(w)  = 1/(2n) ||y' - b - X w||^2 + alpha ||w||_1
    dual    g(v)  = -(n/2) ||v||^2 + v . (y' - b),   ||X^T v||_inf <= alpha

with ``X = sqrt(pi) * z`` and ``y' = sqrt(pi) * y``. Solving happens in
float64; everything a verifier evaluates (design matrix, objectives,
feasibility) is exact integer arithmetic on raw values.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt

import numpy as np

from .numeric import exact_matmul, exact_mul, quantize_array, quantize_raw, rdiv, rdiv_array


class LassoConvergenceError(RuntimeError):
    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap


class LassoCertificateError(RuntimeError):
    """No fixed-point certificate within epsilon could be produced."""

    def __init__(self, message: str, gap_raw: int):
        super().__init__(message)
        self.gap_raw = gap_raw


@dataclass(frozen=True, eq=False)
class LassoSolution:
    w_hat: np.ndarray
    intercept: int
    scale: int
    v_hat: np.ndarray | None = None
    primal: int | None = None
    dual: int | None = None

    @property
    def gap(self) -> int | None:
        if self.primal is None or self.dual is None:
            return None
        return self.primal - self.dual


@dataclass(frozen=True)
class Explanation:
    """Top-K ``(feature index, raw coefficient)`` pairs, largest magnitude first."""

    entries: tuple[tuple[int, int], ...]
    scale: int

    def to_json(self) -> dict:
        return {"scale": self.scale, "entries": [[int(j), int(v)] for j, v in self.entries]}

    @classmethod
    def from_json(cls, obj: dict) -> "Explanation":
        return cls(tuple((int(j), int(v)) for j, v in obj["entries"]), int(obj["scale"]))

    def as_floats(self) -> list[tuple[int, float]]:
        return [(j, v / self.scale) for j, v in self.entries]


def sqrt_raw(pi_raw, scale: int) -> np.ndarray:
    """Nearest-integer square root in fixed point: sqrt(pi) at ``scale``."""
    out = []
    for p in np.asarray(pi_raw).tolist():
        if p < 0:
            raise ValueError("kernel weights must be non-negative")
        n = int(p) * scale
        a = isqrt(n)
        out.append(a + 1 if n - a * a > a else a)
    return np.array(out, dtype=np.int64)


def weighted_design(z_raw, y_raw, pi_raw, scale: int) -> tuple[np.ndarray, np.ndarray]:
    """Fold kernel weights into the data: ``(sqrt(pi) z, sqrt(pi) y)``, raw."""
    z_raw = np.asarray(z_raw)
    y_raw = np.asarray(y_raw)
    sp = sqrt_raw(pi_raw, scale)
    if z_raw.shape[0] != sp.shape[0] or y_raw.shape[0] != sp.shape[0]:
        raise ValueError("z, y and pi must have the same number of rows")
    X = rdiv_array(exact_mul(sp[:, None], z_raw), scale).astype(np.int64)
    yp = rdiv_array(exact_mul(sp, y_raw), scale).astype(np.int64)
    return X, yp


def _soft(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def float_gap(X: np.ndarray, y: np.ndarray, b: float, w: np.ndarray, alpha: float) -> float:
    n = X.shape[0]
    r = y - b - X @ w
    p = r @ r / (2 * n) + alpha * np.abs(w).sum()
    corr = np.abs(X.T @ r).max() if X.shape[1] else 0.0
    s = 1.0 / n if corr == 0 else min(1.0 / n, alpha / corr)
    v = s * r
    d = -0.5 * n * (v @ v) + v @ (y - b)
    return float(p - d)


def coordinate_descent(X, y, alpha: float, tol: float, max_sweeps: int = 10_000, w0=None, b0=None):
    """Cyclic coordinate descent with soft-thresholding and a free intercept.

    Columns are centered internally (an exact reparametrization while the
    intercept is free); without it the sweep crawls whenever the samples sit
    far from the origin. Returns ``(w, b, gap, sweeps)`` once the duality gap
    is at most ``tol``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    mu = X.mean(axis=0)
    Xc = X - mu
    col_sq = (Xc * Xc).sum(axis=0) / n
    w = np.zeros(d) if w0 is None else np.array(w0, dtype=float)
    r = y - y.mean() - Xc @ w

    def unshift():
        return float(y.mean() - mu @ w)

    gap = float_gap(X, y, unshift(), w, alpha)
    for sweep in range(1, max_sweeps + 1):
        if gap <= tol:
            return w, unshift(), gap, sweep - 1
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            xj = Xc[:, j]
            new = _soft(xj @ r / n + col_sq[j] * w[j], alpha) / col_sq[j]
            if new != w[j]:
                r -= xj * (new - w[j])
                w[j] = new
        gap = float_gap(X, y, unshift(), w, alpha)
    if gap <= tol:
        return w, unshift(), gap, max_sweeps
    raise LassoConvergenceError(f"no convergence after {max_sweeps} sweeps (gap {gap:.3g})", gap)


def refit_intercept(X_raw, yp_raw, w_raw, scale: int) -> int:
    """Optimal intercept for fixed raw coefficients, rounded to ``scale``."""
    n = len(yp_raw)
    resid = int(np.asarray(yp_raw).astype(object).sum()) * scale - int(exact_matmul(np.asarray(X_raw), np.asarray(w_raw)).astype(object).sum())
    return rdiv(resid, n * scale)


def solve_weighted_lasso(z_raw, y_raw, pi_raw, alpha: float, scale: int, tol: float = 5e-4,
                         max_sweeps: int = 10_000) -> LassoSolution:
    """Primal part of the weighted LASSO, quantized to ``scale``."""
    X, yp = weighted_design(z_raw, y_raw, pi_raw, scale)
    w, _, _, _ = coordinate_descent(X / scale, yp / scale, alpha, tol, max_sweeps)
    w_raw = quantize_array(w, scale)
    return LassoSolution(w_raw, refit_intercept(X, yp, w_raw, scale), scale)


def residual_raw(X_raw, yp_raw, b_raw: int, w_raw, scale: int) -> np.ndarray:
    """``y' - b - X w`` at scale**2, exact."""
    c = (np.asarray(yp_raw).astype(object) - int(b_raw)) * scale
    return c - exact_matmul(np.asarray(X_raw), np.asarray(w_raw)).astype(object)


def dual_correlations(X_raw, v_raw) -> np.ndarray:
    """``X^T v`` at scale**2, exact."""
    return exact_matmul(np.asarray(X_raw).T, np.asarray(v_raw))


def is_dual_feasible(X_raw, v_raw, alpha_raw: int, scale: int) -> bool:
    f = dual_correlations(X_raw, v_raw)
    limit = int(alpha_raw) * scale
    return all(abs(int(v)) <= limit for v in np.asarray(f).tolist())


def duality_gap(X_raw, yp_raw, b_raw: int, w_raw, v_raw, alpha_raw: int, scale: int) -> tuple[int, int, int]:
    """Primal value, dual value and their difference, raw at ``scale``.

    Each objective is evaluated exactly and rounded once.
    """
    n = len(yp_raw)
    S = scale
    r = [int(v) for v in residual_raw(X_raw, yp_raw, b_raw, w_raw, S).tolist()]
    l1 = sum(abs(int(v)) for v in np.asarray(w_raw).tolist())
    p = rdiv(sum(v * v for v in r) + 2 * n * S * S * int(alpha_raw) * l1, 2 * n * S**3)
    c = [int(v) - int(b_raw) for v in np.asarray(yp_raw).tolist()]
    v = [int(t) for t in np.asarray(v_raw).tolist()]
    d = rdiv(-n * sum(t * t for t in v) + 2 * sum(t * ci for t, ci in zip(v, c)), 2 * S)
    return p, d, p - d


def dual_feasible(X_raw, yp_raw, b_raw: int, w_raw, alpha_raw: int, scale: int, w_ref=None,
                  max_repairs: int = 5_000, max_moves: int = 2_000,
                  margins=(0.0, 0.005, 0.01, 0.015, 0.02, 0.03), min_dual: int | None = None) -> np.ndarray:
    """A dual point that is exactly feasible in fixed point.

    Scales the residual ``r = y' - b - X w`` by ``s = min(1/n, alpha' /
    ||X^T r||_inf)`` for a slightly shrunk ``alpha'``, picks the sign with the
    larger dual value and rounds so the accumulated error in ``X^T v`` stays
    small. Single coordinates are then nudged by one unit until every
    ``|X^T v|_j <= alpha`` holds exactly, and afterwards while a one-unit
    move still raises the dual value. Of the shrink margins tried, the
    point with the best exact dual value wins; if its raw dual value is
    still below ``min_dual`` (or no target is given), a slower search over
    two-coordinate moves polishes it.

    ``w_ref`` (unquantized coefficients) gives a better residual when
    available: rounding ``w`` alone can push its correlations a few percent
    past ``alpha``, and the scaling step would pay for that in full.
    """
    X_raw = np.asarray(X_raw, dtype=np.int64)
    n = X_raw.shape[0]
    S = scale
    r = residual_raw(X_raw, yp_raw, b_raw, w_raw, S)
    if not any(int(t) for t in r.tolist()):
        return np.zeros(n, dtype=np.int64)
    c_raw = np.asarray(yp_raw, dtype=np.int64) - int(b_raw)
    Xf = X_raw / S
    c = c_raw / S
    if w_ref is None:
        rf = np.array([int(t) for t in r.tolist()], dtype=float) / (S * S)
    else:
        rf = c - Xf @ np.asarray(w_ref, dtype=float)
        rf -= rf.mean()  # the intercept that is optimal for w_ref
    corr = np.abs(Xf.T @ rf).max() if Xf.shape[1] else 0.0
    limit = int(alpha_raw) * S

    def value(v):
        return 2 * int(exact_matmul(v, c_raw)) - n * int(exact_matmul(v, v))

    best = None
    for margin in margins:
        s = 1.0 / n if corr == 0 else min(1.0 / n, (1.0 - margin) * (alpha_raw / S) / corr)
        cands = [s * rf, -s * rf]
        vals = [-0.5 * n * (v @ v) + v @ c for v in cands]
        v = _balanced_round(cands[int(np.argmax(vals))], Xf, S)
        v = _repair(X_raw, v, c_raw, limit, max_repairs)
        v = _climb(X_raw, v, c_raw, limit, max_moves)
        if best is None or value(v) > value(best):
            best = v
    if min_dual is None or rdiv(value(best), 2 * S) < min_dual:
        best = _climb(X_raw, best, c_raw, limit, max_moves, pairs=True)
    return best


def _balanced_round(v: np.ndarray, Xf: np.ndarray, scale: int) -> np.ndarray:
    """Round ``v`` to raw units choosing floor or ceil per entry so that the
    running error in ``X^T v`` stays small (greedy vector balancing)."""
    t = v * scale
    lo = np.floor(t)
    frac = t - lo
    out = lo.astype(np.int64)
    err = np.zeros(Xf.shape[1])
    for i in np.argsort(-np.abs(Xf).sum(axis=1), kind="stable"):
        down = err - frac[i] * Xf[i]
        up = down + Xf[i]
        if up @ up < down @ down:
            out[i] += 1
            err = up
        else:
            err = down
    return out


def _repair(X: np.ndarray, v: np.ndarray, c: np.ndarray, limit: int, max_repairs: int) -> np.ndarray:
    n = X.shape[0]
    v = v.astype(np.int64).copy()
    steps = 0
    while True:
        f = dual_correlations(X, v)
        excess = np.abs(f) - limit
        total = int(np.maximum(excess, 0).sum())
        if total == 0:
            return v
        if steps >= max_repairs or not v.any():
            v = rdiv_array(v * 9, 10).astype(np.int64)
            steps = 0
            continue
        j = int(np.argmax(excess))
        sign_f = 1 if f[j] > 0 else -1
        delta = -sign_f * np.sign(X[:, j])
        new_f = f[None, :] + delta[:, None] * X
        new_total = np.maximum(np.abs(new_f) - limit, 0).sum(axis=1)
        new_total = np.where(delta == 0, np.iinfo(np.int64).max, new_total)
        # dual value change (times 2S) of moving v_i by delta_i
        gain = -n * (2 * v * delta + delta * delta) + 2 * delta * c
        order = np.lexsort((-gain, new_total))
        i = int(order[0])
        if new_total[i] >= total:
            v = rdiv_array(v * 9, 10).astype(np.int64)
            steps = 0
            continue
        v[i] += delta[i]
        steps += 1


def _climb(X: np.ndarray, v: np.ndarray, c: np.ndarray, limit: int, max_moves: int,
           pairs: bool = False, n_gainers: int = 40) -> np.ndarray:
    """Greedy one-unit moves that keep ``v`` feasible and raise the dual value.

    With ``pairs`` a move may touch two coordinates: a high-gain step that
    alone would break feasibility, plus any step that repairs it.
    """
    n = X.shape[0]
    v = v.astype(np.int64).copy()
    f = np.asarray(dual_correlations(X, v), dtype=np.int64)
    signs = np.array([1, -1], dtype=np.int64)
    steps = np.concatenate([X, -X])  # row t moves v[t % n] by signs[t // n]
    for _ in range(max_moves):
        grad = c - n * v
        gain = np.concatenate([2 * grad - n, -2 * grad - n])  # times 2S
        ok = (np.abs(f[None, :] + steps) <= limit).all(axis=1)
        single = np.where(ok, gain, 0)
        t = int(np.argmax(single))
        best_gain, best = int(single[t]), (t,)
        if pairs:
            top = np.argsort(-gain, kind="stable")[:n_gainers]
            top = top[gain[top] > 0]
            if top.size:
                moved = f[None, :] + steps[top]
                okb = (np.abs(moved[:, None, :] + steps[None, :, :]) <= limit).all(axis=2)
                # the same coordinate twice adds a quadratic term of 2n
                same = (top[:, None] % n) == (np.arange(2 * n)[None, :] % n)
                sgn = signs[top // n][:, None] * signs[np.arange(2 * n) // n][None, :]
                pair_gain = gain[top][:, None] + gain[None, :] - np.where(same, 2 * n * sgn, 0)
                pair_gain = np.where(okb, pair_gain, 0)
                a, b = np.unravel_index(int(np.argmax(pair_gain)), pair_gain.shape)
                if pair_gain[a, b] > best_gain:
                    best_gain, best = int(pair_gain[a, b]), (int(top[a]), int(b))
        if best_gain <= 0:
            break
        for t in best:
            v[t % n] += signs[t // n]
            f += steps[t]
    return v


def top_k(w_raw, K: int, scale: int) -> Explanation:
    w = [int(t) for t in np.asarray(w_raw).tolist()]
    if not 1 <= K <= len(w):
        raise ValueError(f"K={K} outside [1, {len(w)}]")
    order = sorted(range(len(w)), key=lambda j: (-abs(w[j]), j))
    return Explanation(tuple((j, w[j]) for j in order[:K]), scale)


def certify_lasso(X_raw, yp_raw, alpha: float, epsilon: float, scale: int, max_sweeps: int = 10_000,
                  tol_ladder=(0.01, 0.001, 0.0001)) -> LassoSolution:
    """Solve, quantize, build the dual point and check the gap in fixed point.

    The float solver starts at tolerance ``epsilon/100``, well inside the
    budget, so the coefficients themselves sit close to the optimum; it
    tightens further when the quantized certificate misses ``epsilon``.
    """
    alpha_raw = quantize_raw(alpha, scale)
    eps_raw = quantize_raw(epsilon, scale)
    Xf = np.asarray(X_raw) / scale
    yf = np.asarray(yp_raw) / scale
    w = None
    gap_raw = None
    for frac in tol_ladder:
        w, _, _, _ = coordinate_descent(Xf, yf, alpha, epsilon * frac, max_sweeps, w0=w)
        w_raw = quantize_array(w, scale)
        b_raw = refit_intercept(X_raw, yp_raw, w_raw, scale)
        p_only = duality_gap(X_raw, yp_raw, b_raw, w_raw, np.zeros(len(yp_raw), dtype=np.int64), alpha_raw, scale)[0]
        v_raw = dual_feasible(X_raw, yp_raw, b_raw, w_raw, alpha_raw, scale, w_ref=w, min_dual=p_only - eps_raw // 2)
        p, d, gap_raw = duality_gap(X_raw, yp_raw, b_raw, w_raw, v_raw, alpha_raw, scale)
        if gap_raw <= eps_raw:
            return LassoSolution(w_raw, b_raw, scale, v_raw, p, d)
    raise LassoCertificateError(f"fixed-point duality gap {gap_raw / scale:.4g} exceeds epsilon {epsilon}", gap_raw)
