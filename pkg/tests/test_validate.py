import numpy as np
import pytest

from mccb.planner import PlanResult, backward_plan
from mccb.validate import is_unimodal, mt_exact, validate


@pytest.fixture(scope="module")
def report():
    return validate(instances=1000, seed=0)


def test_default_run_passes(report):
    assert report.ok, report.format()
    assert report["planner_oracle_equivalence"].checked >= 1000
    assert "overall: PASS" in report.format()


def test_report_carries_notes(report):
    text = report.format()
    assert "prose direction" in text
    assert report["q_row_unimodality"].gating is False
    assert report["ucb_gap_two_sided"].gating is False


def test_unimodality_failures_reported_as_info(report):
    res = report["q_row_unimodality"]
    assert res.failures > 0 and res.example
    assert "INFO" in report.format()


def sign_flipped_planner(probs, rewards, H):
    plan = backward_plan(probs, rewards, H)
    q = plan.q.copy()
    q[0] = -q[0]
    v = plan.v.copy()
    v[0] = q[0].max()
    return PlanResult(q, v, q.argmax(axis=1))


def test_mutation_is_caught():
    bad = validate(instances=100, seed=1, planner=sign_flipped_planner)
    assert not bad.ok
    assert bad["planner_oracle_equivalence"].failures > 0
    assert "overall: FAIL" in bad.format()


def test_mt_exact_helper():
    assert mt_exact(5, 100, 100) == 33
    assert mt_exact(10**6, 5, 10) == 1


def test_is_unimodal_tolerance():
    assert is_unimodal(np.array([1.0, 2.0, 2.0 - 1e-14, 2.0]))
