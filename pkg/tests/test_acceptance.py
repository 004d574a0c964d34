"""The fifteen acceptance criteria at their stated tolerances.

The full suite runs once per session; each criterion is reported as its own
test and as one PASS/FAIL line in the terminal summary.
"""
import pytest

from frag_avalanche.montecarlo.simulate import available_workers
from frag_avalanche.verify import CRITERIA, Scenario, run_verify

from conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module")
def results():
    scenario = Scenario(workers=min(8, available_workers()))
    out = {}

    def record(res):
        line = res.line()
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)
        out[res.id] = res

    run_verify(scenario, progress=record)
    return out


@pytest.mark.parametrize("cid", sorted(CRITERIA))
def test_criterion(results, cid):
    res = results[cid]
    assert res.passed, res.line()


def test_statistical_criteria_other_seed():
    # a different master seed must not change the verdicts at alpha = 0.001
    out = run_verify(Scenario(seed=987654321, workers=min(8, available_workers())), only=(4, 10, 11, 12))
    assert all(r.passed for r in out), [r.line() for r in out if not r.passed]
