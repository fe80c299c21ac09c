import json

import numpy as np
import pytest

from expproof.config import LimeConfig
from expproof.model import synthesize_model
from expproof.numeric import FieldElement, quantize_array
from expproof.protocol import (
    Certificate,
    ProverError,
    ProverState,
    derive_challenge,
    load_bundle,
    load_certificate,
    prove,
    random_challenge,
    sample_stream,
    save_bundle,
    save_certificate,
    setup,
    verify,
)
from helpers import honest_run

S = 10_000


@pytest.fixture(scope="module")
def run(mlp14):
    return honest_run(mlp14, LimeConfig(border_lime=True, smpl_type="uniform"), np.random.default_rng(31))


def test_setup_deterministic_with_entropy(mlp14):
    cfg = LimeConfig()
    a, _ = setup(mlp14, cfg, b"seed")
    b, _ = setup(mlp14, cfg, b"seed")
    c, _ = setup(mlp14, cfg, b"other")
    assert a.to_dict() == b.to_dict()
    assert a.com_r != c.com_r and a.com_W != c.com_W
    assert len(a.rho_W) == len(a.rho_r) == 32


def test_fresh_setups_differ(mlp14):
    a, _ = setup(mlp14, LimeConfig())
    b, _ = setup(mlp14, LimeConfig())
    assert a.r_p != b.r_p and a.com_W != b.com_W


def test_setup_scale_mismatch(mlp14):
    with pytest.raises(ValueError):
        setup(mlp14, LimeConfig(scale=1000))


def test_bundle_and_state_round_trip(tmp_path, mlp14):
    state, bundle = setup(mlp14, LimeConfig(), b"x")
    save_bundle(bundle, tmp_path / "b.json")
    assert load_bundle(tmp_path / "b.json").canonical_bytes() == bundle.canonical_bytes()
    assert ProverState.from_dict(state.to_dict()).com_W == state.com_W
    assert "r_p" not in json.dumps(bundle.to_dict())


def test_honest_certificate_verifies(run):
    _, bundle, x, r_v, o, e, cert = run
    report = verify(bundle, x, r_v, o, e, cert)
    assert report.accepted, report.summary()


def test_certificate_file_round_trip(tmp_path, run):
    _, bundle, x, r_v, o, e, cert = run
    save_certificate(cert, tmp_path / "c.json")
    loaded = load_certificate(tmp_path / "c.json")
    assert loaded.canonical_bytes() == cert.canonical_bytes()
    assert verify(bundle, x, r_v, o, e, loaded).accepted


def test_same_query_same_certificate(run):
    state, _, x, r_v, _, _, cert = run
    _, _, again = prove(state, x, r_v)
    assert again.canonical_bytes() == cert.canonical_bytes()


def test_fresh_challenge_changes_samples(run):
    state, bundle, x, r_v, _, _, _ = run
    r_v2 = random_challenge()
    s1 = sample_stream(state.r_p, r_v, state.cfg, len(x))[3]
    s2 = sample_stream(state.r_p, r_v2, state.cfg, len(x))[3]
    assert not np.array_equal(s1, s2)
    o, e, cert = prove(state, x, r_v2)
    assert verify(bundle, x, r_v2, o, e, cert).accepted


def test_replay_to_other_query_rejected(run):
    _, bundle, x, r_v, o, e, cert = run
    x2 = x.copy()
    x2[0] += 1
    for args in ((x2, r_v, o), (x, r_v + 1, o), (x, r_v, 1 - o)):
        report = verify(bundle, *args, e, cert)
        assert report.failed_checks == ["binding"]


def test_model_swap_rejected(run, mlp14):
    state, bundle, x, r_v, _, _, _ = run
    other = synthesize_model({"kind": "mlp", "sizes": [14, 16, 16, 2]}, seed=8)
    swapped = ProverState(other, state.r_p, state.rho_W, state.rho_r, bundle.com_W, bundle.com_r, state.cfg)
    try:
        o, e, cert = prove(swapped, x, r_v)
    except ProverError as exc:
        assert "com_W" in str(exc)
        return
    report = verify(bundle, x, r_v, o, e, cert)
    assert "com_W" in report.failed_checks


def test_other_bundle_rejected(run, mlp14):
    _, _, x, r_v, o, e, cert = run
    _, other_bundle = setup(mlp14, LimeConfig(border_lime=True, smpl_type="uniform"), b"someone else")
    assert set(verify(other_bundle, x, r_v, o, e, cert).failed_checks) == {"binding"}


def test_version_mismatch(run):
    _, bundle, x, r_v, o, e, cert = run
    old = Certificate(cert.stmt, cert.proof, cert.backend, version=0)
    assert verify(bundle, x, r_v, o, e, old).failed_checks == ["version"]
    unknown = Certificate(cert.stmt, cert.proof, "snark")
    assert verify(bundle, x, r_v, o, e, unknown).failed_checks == ["version"]


def test_corrupt_proof_bytes_rejected(run):
    _, bundle, x, r_v, o, e, cert = run
    bad = Certificate(cert.stmt, cert.proof[:-5], cert.backend)
    assert verify(bundle, x, r_v, o, e, bad).failed_checks == ["structure"]


def test_derived_challenge_depends_on_query(run):
    _, bundle, x, *_ = run
    x2 = x.copy()
    x2[3] -= 1
    assert derive_challenge(bundle, x) == derive_challenge(bundle, x)
    assert derive_challenge(bundle, x) != derive_challenge(bundle, x2)


def test_prover_errors_surface(mlp14, monkeypatch):
    state, _ = setup(mlp14, LimeConfig(), b"e")
    import expproof.lime as lime
    from expproof.lasso import LassoCertificateError

    def refuse(*args, **kwargs):
        raise LassoCertificateError("gap too large", 99)

    monkeypatch.setattr(lime, "certify_lasso", refuse)
    with pytest.raises(ProverError, match="no certificate"):
        prove(state, quantize_array(np.zeros(14), S), FieldElement(5))


def test_prove_rejects_wrong_dimension(run):
    state = run[0]
    with pytest.raises(ValueError):
        prove(state, np.zeros(3, dtype=np.int64), FieldElement(1))
