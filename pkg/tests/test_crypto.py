import math
import secrets
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from expproof.crypto import (
    Commitment,
    PrfKey,
    SamplingError,
    commit,
    decompose,
    digests_needed,
    exp_table,
    gauss_inv_cdf_table,
    gaussian_samples,
    hash_stream,
    limbs_per_digest,
    lookup_eval,
    prf_hash,
    recip_sqrt_table,
    recompose,
    uniform_samples,
    verify_commitment,
)
from expproof.numeric import FIELD_PRIME, FieldElement, FixedPoint

S = 10_000
KEY = PrfKey(FieldElement(0xC0FFEE))


def test_commit_deterministic_and_opens():
    rho = b"r" * 32
    assert commit(b"model", rho) == commit(b"model", rho)
    assert verify_commitment(commit(b"model", rho), b"model", rho)
    assert not verify_commitment(commit(b"model", rho), b"modem", rho)


def test_commit_blinding_changes_digest():
    digests = {commit(b"same message", secrets.token_bytes(32)).digest for _ in range(1000)}
    assert len(digests) == 1000


def test_commit_binding_every_byte():
    m, rho = bytes(range(40)), bytes(range(100, 132))
    c = commit(m, rho)
    for i in range(len(m)):
        assert not verify_commitment(c, m[:i] + bytes([m[i] ^ 1]) + m[i + 1:], rho)
    for i in range(len(rho)):
        assert not verify_commitment(c, m, rho[:i] + bytes([rho[i] ^ 1]) + rho[i + 1:])


def test_commit_needs_32_bytes_of_blinding():
    with pytest.raises(ValueError):
        commit(b"m", b"short")
    assert not verify_commitment(Commitment(b"\0" * 32), b"m", b"short")


def test_commitment_hex_round_trip():
    c = commit(b"abc", b"x" * 32)
    assert Commitment.from_hex(c.hex()) == c


def test_prf_deterministic_and_in_range():
    assert prf_hash(KEY, 5) == prf_hash(KEY, 5)
    assert prf_hash(KEY, 5).value < 2**128 < FIELD_PRIME
    with pytest.raises(ValueError):
        prf_hash(KEY, -1)


def test_prf_distinct_indices():
    for _ in range(10_000):
        k = PrfKey(FieldElement(secrets.randbelow(FIELD_PRIME)))
        assert prf_hash(k, 0) != prf_hash(k, 1)


def test_prf_key_is_sum():
    r_p, r_v = FieldElement(FIELD_PRIME - 3), FieldElement(10)
    assert PrfKey.derive(r_p, r_v).k == FieldElement(7)


def test_prf_bit_bias_below_one_percent():
    values = [h.value for h in hash_stream(KEY, 100_000)]
    arr = np.array([[(v >> (8 * i)) & 0xFF for i in range(16)] for v in values], dtype=np.uint8)
    bits = np.unpackbits(arr, axis=1)
    assert np.abs(bits.mean(axis=0) - 0.5).max() < 0.01


def test_decompose_examples():
    limbs, rem = decompose(0, 8)
    assert limbs == [0] * 16 and rem == 0
    limbs, rem = decompose(0x0201, 8)
    assert limbs[:3] == [1, 2, 0] and rem == 0
    assert limbs_per_digest(16) == 8
    assert digests_needed(300 * 14, 16) == math.ceil(4200 / 8)


@given(st.integers(0, 2**128 - 1), st.integers(2, 24))
def test_decompose_round_trip(h, b):
    limbs, rem = decompose(h, b)
    assert len(limbs) == 128 // b
    assert all(0 <= t < 2**b for t in limbs)
    assert 0 <= rem < 2**b
    assert recompose(limbs, rem, b) == h


def test_uniform_samples_chi_square():
    hashes = hash_stream(KEY, digests_needed(100_000, 8))
    s = uniform_samples(hashes, 8, 100_000)
    assert s.shape == (100_000,) and s.min() >= 0 and s.max() < 256
    assert chisquare(np.bincount(s, minlength=256)).pvalue > 0.01


def test_uniform_samples_needs_enough_hashes():
    with pytest.raises(SamplingError):
        uniform_samples(hash_stream(KEY, 2), 16, 17)


def test_verifier_reproduces_samples():
    r_p, r_v = FieldElement(secrets.randbelow(FIELD_PRIME)), FieldElement(secrets.randbelow(FIELD_PRIME))
    prover = uniform_samples(hash_stream(PrfKey.derive(r_p, r_v), 50), 16, 400)
    verifier = uniform_samples([prf_hash(PrfKey(r_p + r_v), i) for i in range(50)], 16, 400)
    assert np.array_equal(prover, verifier)


def test_gaussian_median_and_one_sigma():
    table = gauss_inv_cdf_table(16, S)
    assert abs(int(gaussian_samples([2**15], table)[0])) <= 1
    u = round(0.8413 * 2**16 - 0.5)
    ref = NormalDist().inv_cdf((u + 0.5) / 2**16)
    spacing = 1 / (2**16 * NormalDist().pdf(1.0))
    got = int(gaussian_samples([u], table)[0]) / S
    assert abs(got - ref) <= 0.5 / S
    assert abs(got - 1.0) <= abs(NormalDist().inv_cdf(0.8413) - 1.0) + spacing + 1 / S


def test_gaussian_moments():
    table = gauss_inv_cdf_table(16, S)
    s = uniform_samples(hash_stream(KEY, digests_needed(100_000, 16)), 16, 100_000)
    g = gaussian_samples(s, table) / S
    assert abs(g.mean()) < 0.02
    assert 0.97 < g.std() < 1.03


def test_gaussian_tails_clamped_and_domain():
    table = gauss_inv_cdf_table(16, S, tail=4.0)
    assert int(table.entries[0]) == -40_000 and int(table.entries[-1]) == 40_000
    with pytest.raises(SamplingError):
        gaussian_samples([2**16], table)


def test_table_anchor_values():
    assert lookup_eval(exp_table(S), FixedPoint(0, S)) == FixedPoint(S, S)
    e1 = lookup_eval(exp_table(S), FixedPoint(-S, S))
    assert abs(e1.raw / S - math.exp(-1)) <= 1 / S
    assert e1.raw == 3679
    assert lookup_eval(recip_sqrt_table(S), FixedPoint(S, S)) == FixedPoint(S, S)


def test_exp_clamps_below_domain():
    t = exp_table(S)
    assert int(t.lookup([-50 * S])[0]) == int(t.entries[0]) == 0
    assert int(t.lookup([S])[0]) == S  # above 0 clamps to exp(0)


def test_tables_monotone():
    assert np.all(np.diff(exp_table(S).entries) >= 0)
    assert np.all(np.diff(recip_sqrt_table(S).entries) <= 0)
    assert np.all(np.diff(gauss_inv_cdf_table(12, S).entries) >= 0)


def test_lookup_eval_scale_mismatch():
    with pytest.raises(ValueError):
        lookup_eval(exp_table(S), FixedPoint(0, 100))


def test_table_description():
    d = exp_table(S).describe()
    assert d == {"name": "exp", "lo": -200_000, "hi": 0, "key_scale": S, "size": 200_000, "scale": S}
