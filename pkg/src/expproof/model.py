"""Fixed-point inference for ReLU networks and random forests.

Model files are JSON with explicit scale and raw integer arrays::

    {"format": "expproof-model", "version": 1, "kind": "mlp", "scale": 10000,
     "layers": [{"weight": [[...], ...], "bias": [...]}, ...]}

    {"format": "expproof-model", "version": 1, "kind": "forest", "scale": 10000,
     "n_features": 14,
     "trees": [{"feature": [...], "threshold": [...], "left": [...],
                "right": [...], "label": [...]}, ...]}

In a tree, node 0 is the root; a node with ``left == right == -1`` is a
leaf whose ``label`` is its class, internal nodes send ``x[feature] <=
threshold`` to ``left``. MLP layers are ReLU'd except the last; a one-unit
head predicts 1 iff its logit is positive, a two-unit head takes the argmax
with ties going to class 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numeric import DEFAULT_SCALE, RAW_MAX, exact_matmul, quantize_array, rdiv_array

MODEL_FORMAT = "expproof-model"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """A model file or dict violates the schema or a structural invariant."""


@dataclass(frozen=True, eq=False)
class Layer:
    weight: np.ndarray  # (out, in) raw
    bias: np.ndarray  # (out,) raw


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass(frozen=True, eq=False)
class ModelWeights:
    kind: str
    scale: int = DEFAULT_SCALE
    layers: tuple[Layer, ...] = ()
    trees: tuple[Tree, ...] = ()
    n_features: int = 0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "mlp":
            if not self.layers:
                raise ModelFormatError("mlp needs at least one layer")
            object.__setattr__(self, "n_features", int(self.layers[0].weight.shape[1]))
        elif self.kind != "forest":
            raise ModelFormatError(f"unknown model kind {self.kind!r}")
        _validate(self)

    def __eq__(self, other) -> bool:
        return isinstance(other, ModelWeights) and self.canonical_bytes() == other.canonical_bytes()

    def __hash__(self) -> int:
        return hash(self.canonical_bytes())

    @property
    def input_dim(self) -> int:
        return self.n_features

    def to_dict(self) -> dict:
        out = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": self.kind, "scale": self.scale}
        if self.kind == "mlp":
            out["layers"] = [
                {"weight": l.weight.astype(int).tolist(), "bias": l.bias.astype(int).tolist()} for l in self.layers
            ]
        else:
            out["n_features"] = self.n_features
            out["trees"] = [
                {
                    "feature": t.feature.astype(int).tolist(),
                    "threshold": t.threshold.astype(int).tolist(),
                    "left": t.left.astype(int).tolist(),
                    "right": t.right.astype(int).tolist(),
                    "label": t.label.astype(int).tolist(),
                }
                for t in self.trees
            ]
        return out

    def canonical_bytes(self) -> bytes:
        """Byte-stable encoding; this is what the weight commitment binds."""
        if "bytes" not in self._cache:
            self._cache["bytes"] = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return self._cache["bytes"]

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelWeights":
        return _parse(obj)


def _int_array(value, where: str, ndim: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=object)
    except Exception as exc:  # ragged lists etc.
        raise ModelFormatError(f"{where}: not a rectangular array ({exc})") from None
    if arr.ndim != ndim:
        raise ModelFormatError(f"{where}: expected {ndim}-d array, got {arr.ndim}-d")
    for v in arr.ravel():
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise ModelFormatError(f"{where}: entries must be integers, found {v!r}")
        if abs(int(v)) > RAW_MAX:
            raise ModelFormatError(f"{where}: value {v} exceeds the fixed-point range")
    return arr.astype(np.int64)


def _parse(obj: dict) -> ModelWeights:
    if not isinstance(obj, dict):
        raise ModelFormatError("model: expected a JSON object")
    if obj.get("format", MODEL_FORMAT) != MODEL_FORMAT:
        raise ModelFormatError(f"format: expected {MODEL_FORMAT!r}, got {obj.get('format')!r}")
    if int(obj.get("version", MODEL_VERSION)) != MODEL_VERSION:
        raise ModelFormatError(f"version: unsupported model version {obj.get('version')!r}")
    kind = obj.get("kind")
    scale = obj.get("scale")
    if not isinstance(scale, int) or scale <= 0:
        raise ModelFormatError(f"scale: expected a positive integer, got {scale!r}")
    if kind == "mlp":
        raw_layers = obj.get("layers")
        if not isinstance(raw_layers, list) or not raw_layers:
            raise ModelFormatError("layers: expected a non-empty list")
        layers = []
        for i, l in enumerate(raw_layers):
            if not isinstance(l, dict) or "weight" not in l or "bias" not in l:
                raise ModelFormatError(f"layers[{i}]: expected an object with 'weight' and 'bias'")
            layers.append(Layer(_int_array(l["weight"], f"layers[{i}].weight", 2), _int_array(l["bias"], f"layers[{i}].bias", 1)))
        return ModelWeights("mlp", scale, layers=tuple(layers))
    if kind == "forest":
        n_features = obj.get("n_features")
        if not isinstance(n_features, int) or n_features <= 0:
            raise ModelFormatError(f"n_features: expected a positive integer, got {n_features!r}")
        raw_trees = obj.get("trees")
        if not isinstance(raw_trees, list) or not raw_trees:
            raise ModelFormatError("trees: expected a non-empty list")
        trees = []
        for i, t in enumerate(raw_trees):
            keys = ("feature", "threshold", "left", "right", "label")
            if not isinstance(t, dict) or any(k not in t for k in keys):
                raise ModelFormatError(f"trees[{i}]: expected keys {', '.join(keys)}")
            trees.append(Tree(*(_int_array(t[k], f"trees[{i}].{k}", 1) for k in keys)))
        return ModelWeights("forest", scale, trees=tuple(trees), n_features=n_features)
    raise ModelFormatError(f"kind: expected 'mlp' or 'forest', got {kind!r}")


def _validate(w: ModelWeights) -> None:
    if w.kind == "mlp":
        prev = None
        for i, layer in enumerate(w.layers):
            if layer.weight.ndim != 2 or layer.bias.ndim != 1:
                raise ModelFormatError(f"layers[{i}]: weight must be 2-d and bias 1-d")
            out_dim, in_dim = layer.weight.shape
            if layer.bias.shape[0] != out_dim:
                raise ModelFormatError(f"layers[{i}].bias: length {layer.bias.shape[0]} != weight rows {out_dim}")
            if prev is not None and in_dim != prev:
                raise ModelFormatError(f"layers[{i}].weight: expects {in_dim} inputs but previous layer emits {prev}")
            prev = out_dim
        if prev not in (1, 2):
            raise ModelFormatError(f"layers[-1]: output head must have 1 or 2 units, got {prev}")
        return
    for i, t in enumerate(w.trees):
        n = t.n_nodes
        if n == 0:
            raise ModelFormatError(f"trees[{i}]: empty tree")
        if not all(len(a) == n for a in (t.threshold, t.left, t.right, t.label)):
            raise ModelFormatError(f"trees[{i}]: node arrays differ in length")
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        while stack:
            node = stack.pop()
            if seen[node]:
                raise ModelFormatError(f"trees[{i}]: node {node} reachable twice (cycle or shared child)")
            seen[node] = True
            left, right = int(t.left[node]), int(t.right[node])
            if left == -1 and right == -1:
                if int(t.label[node]) not in (0, 1):
                    raise ModelFormatError(f"trees[{i}]: leaf {node} has label {int(t.label[node])}, expected 0 or 1")
                continue
            if not (0 <= left < n and 0 <= right < n):
                raise ModelFormatError(f"trees[{i}]: node {node} has children ({left}, {right}) outside [0, {n})")
            feat = int(t.feature[node])
            if not 0 <= feat < w.n_features:
                raise ModelFormatError(f"trees[{i}]: node {node} tests feature {feat} >= n_features {w.n_features}")
            stack.extend((left, right))


def load_model(path) -> ModelWeights:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return _parse(obj)
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None


def save_model(weights: ModelWeights, path) -> None:
    Path(path).write_text(json.dumps(weights.to_dict(), sort_keys=True, indent=1) + "\n")


def _as_batch(w: ModelWeights, xs) -> np.ndarray:
    xs = np.asarray(xs)
    if xs.ndim != 2 or xs.shape[1] != w.input_dim:
        raise ValueError(f"dimension mismatch: model expects {w.input_dim} features, got shape {xs.shape}")
    if xs.dtype != object and not np.issubdtype(xs.dtype, np.integer):
        raise TypeError("inputs must be raw fixed-point integers")
    return xs


def mlp_logits(w: ModelWeights, xs) -> np.ndarray:
    """Raw output logits, one row per input."""
    h = _as_batch(w, xs)
    for i, layer in enumerate(w.layers):
        acc = exact_matmul(h, layer.weight.T)
        h = rdiv_array(acc, w.scale) + layer.bias
        if i < len(w.layers) - 1:
            h = np.maximum(h, 0)
    return h


def _forest_votes(w: ModelWeights, xs) -> np.ndarray:
    xs = _as_batch(w, xs)
    rows = np.arange(xs.shape[0])
    ones = np.zeros(xs.shape[0], dtype=np.int64)
    for t in w.trees:
        node = np.zeros(xs.shape[0], dtype=np.int64)
        while True:
            internal = t.left[node] != -1
            if not internal.any():
                break
            go_left = xs[rows, t.feature[node]] <= t.threshold[node]
            nxt = np.where(go_left, t.left[node], t.right[node])
            node = np.where(internal, nxt, node)
        ones += t.label[node]
    return ones


def infer_batch(w: ModelWeights, xs) -> np.ndarray:
    """Labels for a batch of raw input rows, order preserved."""
    if w.kind == "mlp":
        logits = mlp_logits(w, xs)
        if logits.shape[1] == 1:
            return (logits[:, 0] > 0).astype(np.int64)
        return (logits[:, 1] > logits[:, 0]).astype(np.int64)
    votes = _forest_votes(w, xs)
    return (2 * votes > len(w.trees)).astype(np.int64)


def infer(w: ModelWeights, x) -> int:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d input, got shape {x.shape}")
    return int(infer_batch(w, x[None, :])[0])


def synthesize_model(spec: dict, seed: int, scale: int = DEFAULT_SCALE) -> ModelWeights:
    """Pseudo-random model for tests and demos.

    ``spec`` is ``{"kind": "mlp", "sizes": [14, 16, 16, 2]}`` or
    ``{"kind": "forest", "n_features": 14, "n_trees": 5, "max_depth": 4}``.
    """
    rng = np.random.default_rng(seed)
    kind = spec.get("kind")
    if kind == "mlp":
        sizes = [int(s) for s in spec["sizes"]]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"invalid mlp sizes {sizes}")
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            wt = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
            b = rng.normal(0.0, 0.1, size=fan_out)
            layers.append(Layer(quantize_array(wt, scale), quantize_array(b, scale)))
        return ModelWeights("mlp", scale, layers=tuple(layers))
    if kind == "forest":
        d = int(spec["n_features"])
        n_trees = int(spec.get("n_trees", 5))
        depth = int(spec.get("max_depth", 4))
        if d < 1 or n_trees < 1 or depth < 1:
            raise ValueError(f"invalid forest spec {spec}")
        trees = [_random_tree(rng, d, depth, scale) for _ in range(n_trees)]
        return ModelWeights("forest", scale, trees=tuple(trees), n_features=d)
    raise ValueError(f"unknown model kind {kind!r}")


def _random_tree(rng, d: int, depth: int, scale: int) -> Tree:
    feature, threshold, left, right, label = [], [], [], [], []

    def grow(level: int) -> int:
        idx = len(feature)
        feature.append(0)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        label.append(-1)
        if level == depth:
            label[idx] = int(rng.integers(0, 2))
            return idx
        feature[idx] = int(rng.integers(0, d))
        threshold[idx] = float(rng.normal(0.0, 0.7))
        left[idx] = grow(level + 1)
        right[idx] = grow(level + 1)
        return idx

    grow(0)
    thr = quantize_array(np.array(threshold), scale)
    return Tree(
        np.array(feature, dtype=np.int64),
        thr,
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(label, dtype=np.int64),
    )


def linear_model(coef, intercept: float = 0.0, scale: int = DEFAULT_SCALE) -> ModelWeights:
    """Two-logit MLP predicting 1 iff ``coef . x + intercept > 0``."""
    coef = np.asarray(coef, dtype=float)
    weight = np.vstack([np.zeros_like(coef), coef])
    bias = np.array([0.0, intercept])
    return ModelWeights("mlp", scale, layers=(Layer(quantize_array(weight, scale), quantize_array(bias, scale)),))
