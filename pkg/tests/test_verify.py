import json

import pytest

from backscatter.verify import SUITES, run_suites


@pytest.mark.parametrize("name", sorted(SUITES))
def test_suite_passes(name):
    (result,) = run_suites([name], seed=1)
    assert result.passed, result.failures[:5]
    assert result.cases > 0


def test_fault_injection_breaks_the_sphere_suite():
    (result,) = run_suites(["sphere"], fault="corrupt-weights")
    assert not result.passed
    assert any("weight sum" in f for f in result.failures)


def test_suites_are_deterministic():
    a = [r.as_dict() for r in run_suites(["trace", "singular"], seed=7, cases=20)]
    b = [r.as_dict() for r in run_suites(["trace", "singular"], seed=7, cases=20)]
    assert json.dumps(a, default=float) == json.dumps(b, default=float)


def test_unknown_names_are_rejected():
    with pytest.raises(KeyError):
        run_suites(["nope"])
    with pytest.raises(KeyError):
        run_suites(["pv"], fault="flip-signs")
