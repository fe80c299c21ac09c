import json
from dataclasses import replace

import numpy as np
import pytest

from expproof.config import LimeConfig
from expproof.relation import CHECKS, CheckReport, Statement, Witness, check_relation, enumerate_tampers
from helpers import honest_run

S = 10_000


@pytest.fixture(scope="module")
def border_pair(mlp14):
    *_, cert = honest_run(mlp14, LimeConfig(border_lime=True), np.random.default_rng(21))
    return cert.stmt, cert.witness


@pytest.fixture(scope="module")
def plain_pair(forest14):
    *_, cert = honest_run(forest14, LimeConfig(smpl_type="uniform", krnl_type="none"), np.random.default_rng(22))
    return cert.stmt, cert.witness


def test_honest_pairs_accepted(border_pair, plain_pair):
    for stmt, wit in (border_pair, plain_pair):
        report = check_relation(stmt, wit)
        assert report.accepted, report.summary()
        assert report.summary() == "ACCEPT"
        assert set(report.timings) <= set(CHECKS)


def test_checker_is_pure(border_pair):
    stmt, wit = border_pair
    before = (stmt.canonical_bytes(), wit.canonical_bytes())
    first = check_relation(stmt, wit)
    second = check_relation(stmt, wit)
    assert first.failures == second.failures == []
    assert (stmt.canonical_bytes(), wit.canonical_bytes()) == before


def test_reserialized_pair_accepted(border_pair):
    stmt, wit = border_pair
    stmt2 = Statement.from_dict(json.loads(json.dumps(stmt.to_dict())))
    wit2 = Witness.from_dict(json.loads(json.dumps(wit.to_dict())))
    assert stmt2 == stmt and wit2 == wit
    assert check_relation(stmt2, wit2).accepted


def test_label_flip_caught(plain_pair):
    stmt, wit = plain_pair
    y = np.array(wit.y)
    y[17] = 1 - y[17]
    report = check_relation(stmt, replace(wit, y=y))
    assert "labels" in report.failed_checks
    assert "first at sample 17" in dict(report.failures)["labels"]


def test_coefficient_drift(plain_pair):
    stmt, wit = plain_pair
    j = stmt.e.entries[-1][0]
    w = np.array(wit.w_hat)
    w[j] += S // 4
    report = check_relation(stmt, replace(wit, w_hat=w))
    assert "lasso_gap" in report.failed_checks
    # a single ulp either stays inside the gap budget or is caught there
    w = np.array(wit.w_hat)
    w[0] += 1
    report = check_relation(stmt, replace(wit, w_hat=w))
    assert set(report.failed_checks) <= {"lasso_gap", "top_k"}


@pytest.mark.parametrize("which", ["border_pair", "plain_pair"])
def test_every_tamper_names_its_check(which, request):
    stmt, wit = request.getfixturevalue(which)
    for seed in range(5):
        tampers = enumerate_tampers(stmt, wit, seed)
        assert len(tampers) >= 10
        for t in tampers:
            report = check_relation(t.stmt, t.wit)
            assert not report.accepted, t.name
            assert t.expected in report.failed_checks, (t.name, report.summary())


def test_structure_short_circuits(plain_pair):
    stmt, wit = plain_pair
    report = check_relation(stmt, replace(wit, pi=np.asarray(wit.pi)[:5]))
    assert report.failed_checks == ["structure"]
    report = check_relation(replace(stmt, x=stmt.x[:3]), wit)
    assert report.failed_checks[0] == "structure"


def test_border_point_required_when_configured(border_pair):
    stmt, wit = border_pair
    report = check_relation(stmt, replace(wit, x_border=None))
    assert report.failed_checks == ["structure"]


def test_report_dict():
    r = CheckReport()
    r.fail("hash", "bad")
    assert r.to_dict() == {"accepted": False, "failures": [{"check": "hash", "message": "bad"}], "timings": {}}
    assert r.summary().startswith("REJECT")
