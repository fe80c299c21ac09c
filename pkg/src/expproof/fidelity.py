"""Fidelity evaluation: how often does the explanation predict like the model?

For each input the explanation is turned into a classifier (1 iff
``w . z + b >= 0.5``) and compared with the model on fresh points drawn
around the input, uniformly in a cube of half-edge 0.2 or from a Gaussian
of std 0.2. Prediction similarity is the fraction of matches.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import LimeConfig
from .lime import explain, linear_predict
from .model import ModelWeights, infer_batch
from .numeric import quantize_array

# (name, features, continuous features) shaped after common tabular benchmarks
DATASET_SHAPES = {"adult": (14, 6), "credit": (23, 14), "german": (20, 7)}

VARIANTS = tuple(
    dict(smpl_type=s, krnl_type=k, border_lime=b)
    for b in (False, True)
    for s in ("gaussian", "uniform")
    for k in ("exponential", "none")
)


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    X: np.ndarray  # (rows, d) raw
    labels: np.ndarray
    scale: int

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _standardize(cols: np.ndarray, continuous: np.ndarray) -> np.ndarray:
    out = cols.astype(float).copy()
    mu = out[:, continuous].mean(axis=0)
    sd = out[:, continuous].std(axis=0)
    sd[sd == 0] = 1.0
    out[:, continuous] = (out[:, continuous] - mu) / sd
    return out


def make_dataset(name: str, rows: int = 1000, seed: int = 0, scale: int = 10_000) -> Dataset:
    """Synthetic stand-in with the dimensionality of a known benchmark.

    Continuous columns are log-normal-ish and get standardized; the rest are
    0/1 indicators. Labels come from a fixed random two-layer teacher.
    """
    if name not in DATASET_SHAPES:
        raise ValueError(f"unknown dataset {name!r}; choose from {sorted(DATASET_SHAPES)}")
    d, n_cont = DATASET_SHAPES[name]
    rng = np.random.default_rng(seed)
    raw = np.empty((rows, d))
    raw[:, :n_cont] = np.exp(rng.normal(0.0, 0.5, size=(rows, n_cont))) * rng.uniform(1, 50, size=n_cont)
    raw[:, n_cont:] = rng.random((rows, d - n_cont)) < rng.uniform(0.1, 0.6, size=d - n_cont)
    X = _standardize(raw, np.arange(n_cont))
    W1 = rng.normal(size=(d, 8)) / np.sqrt(d)
    w2 = rng.normal(size=8)
    score = np.tanh(X @ W1) @ w2
    labels = (score > np.median(score)).astype(np.int64)
    return Dataset(name, quantize_array(X, scale), labels, scale)


def load_csv(path, label_column: str | int = -1, scale: int = 10_000) -> Dataset:
    """Numeric CSV with a header row; columns with values other than 0/1 are
    treated as continuous and standardized."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header and at least one data row")
    header, body = rows[0], rows[1:]
    if isinstance(label_column, str):
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r}")
        li = header.index(label_column)
    else:
        li = label_column % len(header)
    data = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    arr = np.array(data)
    labels = arr[:, li].astype(np.int64)
    feats = np.delete(arr, li, axis=1)
    continuous = np.array([not np.isin(feats[:, j], (0.0, 1.0)).all() for j in range(feats.shape[1])])
    X = _standardize(feats, np.nonzero(continuous)[0])
    return Dataset(path.stem, quantize_array(X, scale), labels, scale)


def save_csv(ds: Dataset, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(ds.d)] + ["label"])
        for row, lab in zip(ds.X / ds.scale, ds.labels):
            w.writerow([f"{v:.4f}" for v in row] + [int(lab)])


def eval_points(x, rng, count: int, sampling: str, width: float, scale: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if sampling == "uniform":
        off = rng.uniform(-width, width, size=(count, len(x)))
    elif sampling == "gaussian":
        off = rng.normal(0.0, width, size=(count, len(x)))
    else:
        raise ValueError(f"unknown eval sampling {sampling!r}")
    return x[None, :] + quantize_array(off, scale)


def prediction_similarity(model: ModelWeights, lasso, points) -> float:
    return float(np.mean(linear_predict(lasso, points) == infer_batch(model, points)))


@dataclass
class FidelityResult:
    variant: str
    eval_sampling: str
    per_input: list[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_input))

    @property
    def std(self) -> float:
        return float(np.std(self.per_input))


def eval_fidelity(model: ModelWeights, inputs, base: LimeConfig | None = None, variants=VARIANTS,
                  eval_sampling=("uniform", "gaussian"), eval_n: int = 1000, width: float = 0.2,
                  seed: int = 0, timings: list | None = None) -> list[FidelityResult]:
    """Mean prediction similarity per (variant, evaluation sampling).

    LIME samples come from a seeded generator (this is the clear-text
    harness, not the protocol). Every variant sees the same sample stream
    and the same evaluation points for a given input.
    """
    base = base or LimeConfig(scale=model.scale)
    inputs = np.asarray(inputs, dtype=np.int64)
    if inputs.ndim != 2 or inputs.shape[1] != model.input_dim:
        raise ValueError(f"inputs must have shape (k, {model.input_dim})")
    results = {}
    for i, x in enumerate(inputs):
        rng = np.random.default_rng([seed, i])
        stream = rng.integers(0, 1 << base.b, size=base.with_(border_lime=True).samples_needed(len(x)))
        evals = {s: eval_points(x, rng, eval_n, s, width, base.scale) for s in eval_sampling}
        for v in variants:
            cfg = base.with_(**v)
            # standard LIME reads the stream after the direction seeds, like BorderLIME's neighborhood
            samples = stream if cfg.border_lime else stream[cfg.m * len(x):]
            res = explain(x, model, cfg, samples)
            if timings is not None:
                timings.append({"input": i, "variant": cfg.variant, **res.timings})
            for s, pts in evals.items():
                key = (cfg.variant, s)
                results.setdefault(key, FidelityResult(cfg.variant, s)).per_input.append(
                    prediction_similarity(model, res.lasso, pts))
    return list(results.values())


def results_csv(results: list[FidelityResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "eval_sampling", "n_inputs", "mean", "std"])
    for r in results:
        w.writerow([r.variant, r.eval_sampling, len(r.per_input), f"{r.mean:.6f}", f"{r.std:.6f}"])
    return buf.getvalue()


def results_table(results: list[FidelityResult]) -> str:
    lines = [f"{'variant':<12} {'eval':<9} similarity"]
    for r in results:
        lines.append(f"{r.variant:<12} {r.eval_sampling:<9} {r.mean:.4f} +- {r.std:.4f}")
    return "\n".join(lines)


TIMING_PHASES = ("hash", "border", "sampling+kernel", "inference", "lasso", "self_check")


def timing_report(runs: list[dict]) -> str:
    """CSV of per-phase wall-clock seconds, one row per run.

    ``runs`` are the ``timings`` dicts filled by :func:`expproof.protocol.prove`
    (or by :func:`eval_fidelity`); missing phases are reported as 0.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", *TIMING_PHASES, "total"])
    for i, t in enumerate(runs):
        phases = [round(float(t.get(p, 0.0)), 6) for p in TIMING_PHASES]
        total = max(round(float(t.get("total", 0.0)), 6), round(sum(phases), 6))
        w.writerow([i, *(f"{p:.6f}" for p in phases), f"{total:.6f}"])
    return buf.getvalue()
