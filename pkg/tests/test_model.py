import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expproof.model import (
    Layer,
    ModelFormatError,
    ModelWeights,
    Tree,
    infer,
    infer_batch,
    linear_model,
    load_model,
    mlp_logits,
    save_model,
    synthesize_model,
)
from expproof.numeric import quantize_array

S = 10_000


def q(xs):
    return quantize_array(np.asarray(xs, dtype=float), S)


def sign_mlp():
    return ModelWeights("mlp", S, layers=(Layer(q([[1.0]]), q([0.0])),))


def stump():
    tree = Tree(np.array([0, 0, 0]), q([0.0, 0.0, 0.0]), np.array([1, -1, -1]), np.array([2, -1, -1]),
                np.array([-1, 0, 1]))
    return ModelWeights("forest", S, trees=(tree,), n_features=3)


def test_sign_mlp():
    m = sign_mlp()
    assert infer(m, q([0.5])) == 1
    assert infer(m, q([-0.5])) == 0
    assert infer(m, q([0.0])) == 0  # not strictly positive


def test_stump():
    m = stump()
    assert infer(m, q([0.3, 1.0, -1.0])) == 1
    assert infer(m, q([0.0, 1.0, -1.0])) == 0  # x <= threshold goes left


def test_batch_is_elementwise_lift():
    for m, xs in ((sign_mlp(), q([[0.5], [-0.5], [0.0]])), (stump(), q([[0.3, 0, 0], [-0.3, 0, 0], [0, 0, 0]]))):
        assert infer_batch(m, xs).tolist() == [infer(m, x) for x in xs]


def test_two_logit_tie_goes_to_class_zero():
    m = ModelWeights("mlp", S, layers=(Layer(q([[1.0], [1.0]]), q([0.0, 0.0])),))
    assert infer(m, q([0.7])) == 0


def test_forest_tie_goes_to_class_zero():
    leaf0 = Tree(np.array([0]), q([0.0]), np.array([-1]), np.array([-1]), np.array([0]))
    leaf1 = Tree(np.array([0]), q([0.0]), np.array([-1]), np.array([-1]), np.array([1]))
    m = ModelWeights("forest", S, trees=(leaf0, leaf1), n_features=1)
    assert infer(m, q([1.0])) == 0


def test_random_mlp_is_deterministic(mlp14, rng):
    x = q(rng.normal(size=14))
    first = infer(mlp14, x)
    assert all(infer(mlp14, x) == first for _ in range(100))


def test_infer_pure_over_many_calls(forest14, rng):
    xs = q(rng.normal(size=(20, 14)))
    ref = infer_batch(forest14, xs)
    for _ in range(1000 // 20):
        assert np.array_equal(infer_batch(forest14, xs), ref)


def test_dimension_mismatch(mlp14):
    with pytest.raises(ValueError):
        infer(mlp14, q(np.zeros(13)))
    with pytest.raises(TypeError):
        infer(mlp14, np.zeros(14))


def test_synthesize_determinism_and_shape():
    spec = {"kind": "mlp", "sizes": [14, 16, 16, 2]}
    a, b, c = synthesize_model(spec, 1), synthesize_model(spec, 1), synthesize_model(spec, 2)
    assert a == b and a != c
    assert a.input_dim == 14
    assert [l.weight.shape for l in a.layers] == [(16, 14), (16, 16), (2, 16)]
    f = synthesize_model({"kind": "forest", "n_features": 20, "n_trees": 6, "max_depth": 3}, 0)
    assert f.input_dim == 20 and len(f.trees) == 6


def rational_mlp(m: ModelWeights, x) -> list[Fraction]:
    """Reference: exact rationals, ReLU between layers, no rounding at all."""
    h = [Fraction(int(v), S) for v in x]
    for i, l in enumerate(m.layers):
        out = []
        for row, bias in zip(l.weight.tolist(), l.bias.tolist()):
            s = sum(Fraction(w, S) * hv for w, hv in zip(row, h)) + Fraction(bias, S)
            out.append(max(s, Fraction(0)) if i < len(m.layers) - 1 else s)
        h = out
    return h


@given(st.integers(0, 10**6))
def test_mlp_matches_rational_reference(seed):
    m = synthesize_model({"kind": "mlp", "sizes": [4, 4, 4, 2]}, seed)
    x = q(np.random.default_rng(seed).normal(size=4))
    got = mlp_logits(m, x[None, :])[0]
    ref = rational_mlp(m, x)
    # one rounding per layer; each ulp can be amplified by the next layer's weights
    bound = Fraction(1, S) * len(m.layers) * (1 + max(int(np.abs(l.weight).sum(axis=1).max()) for l in m.layers) / S) ** 2
    for g, r in zip(got.tolist(), ref):
        assert abs(Fraction(int(g), S) - r) <= bound


def walk(tree: Tree, x) -> int:
    def rec(node):
        if tree.left[node] == -1:
            return int(tree.label[node])
        nxt = tree.left[node] if x[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
        return rec(int(nxt))
    return rec(0)


@given(st.integers(0, 10**6))
def test_forest_matches_path_walking(seed):
    m = synthesize_model({"kind": "forest", "n_features": 6, "n_trees": 5, "max_depth": 4}, seed)
    xs = q(np.random.default_rng(seed).normal(size=(16, 6)))
    for x, got in zip(xs, infer_batch(m, xs)):
        votes = sum(walk(t, x) for t in m.trees)
        assert got == (1 if votes * 2 > len(m.trees) else 0)


def test_linear_model_predicts_halfspace(rng):
    coef = rng.normal(size=5)
    m = linear_model(coef, 0.3)
    xs = rng.normal(size=(200, 5))
    xs = xs[np.abs(xs @ coef + 0.3) > 1e-2]
    assert np.array_equal(infer_batch(m, q(xs)), (xs @ coef + 0.3 > 0).astype(int))


def test_save_load_round_trip(tmp_path, mlp14, forest14):
    for m in (mlp14, forest14):
        p = tmp_path / "m.json"
        save_model(m, p)
        assert load_model(p) == m
        assert load_model(p).canonical_bytes() == m.canonical_bytes()


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.update(kind="svm"), "kind"),
        (lambda d: d.update(scale=0), "scale"),
        (lambda d: d["layers"][1].update(weight=[[1, 2]]), "layers[1]"),
        (lambda d: d["layers"][0]["bias"].append(3), "layers[0].bias"),
        (lambda d: d["layers"][0]["weight"][0].__setitem__(0, 0.5), "integers"),
        (lambda d: d["layers"].pop(), "output head"),
    ],
)
def test_loader_rejects_malformed_mlp(tmp_path, mlp14, mutate, fragment):
    d = mlp14.to_dict()
    mutate(d)
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    with pytest.raises(ModelFormatError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
        load_model(p)


def test_loader_rejects_bad_tree(tmp_path, forest14):
    d = forest14.to_dict()
    d["trees"][0]["feature"][0] = 99
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    with pytest.raises(ModelFormatError, match="n_features"):
        load_model(p)
    d = forest14.to_dict()
    d["trees"][0]["left"][0] = 0  # self loop
    p.write_text(json.dumps(d))
    with pytest.raises(ModelFormatError, match="reachable twice"):
        load_model(p)


def test_loader_reports_json_position(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{"kind": "mlp",\n "scale": }')
    with pytest.raises(ModelFormatError, match=r"broken.json:2:\d+"):
        load_model(p)
