"""Stepdown and stepup engines."""

import numpy as np
import pytest

from core import constants, procedures
from core.errors import ParameterError
from core.state_schema import ControlParams, PValueSet


def holm(s, alpha=0.05):
    return constants.holm_constants(ControlParams(s=s, alpha=alpha))


def bh(s, alpha):
    return constants.bh_stepup_constants(ControlParams(s=s, alpha=alpha))


def test_stepdown_holm_example():
    outcome = procedures.stepdown(PValueSet([0.001, 0.01, 0.02, 0.9]), holm(4))
    assert outcome.num_rejected == 3
    assert outcome.rejected == frozenset({0, 1, 2})
    assert outcome.mode == "stepdown"


def test_stepdown_rejects_nothing_when_first_fails():
    outcome = procedures.stepdown(PValueSet([0.02, 0.5, 0.9]), holm(3))
    assert outcome.num_rejected == 0
    assert outcome.rejected == frozenset()


def test_stepdown_all_zero_rejects_all():
    assert procedures.stepdown(PValueSet([0.0] * 5), holm(5)).num_rejected == 5


def test_stepup_and_stepdown_examples():
    thresholds = bh(4, 0.2)
    single = PValueSet([0.04, 0.9, 0.9, 0.9])
    assert procedures.stepup(single, thresholds).num_rejected == 1
    assert procedures.stepdown(single, thresholds).num_rejected == 1

    late = PValueSet([0.06, 0.09, 0.9, 0.9])
    assert procedures.stepup(late, thresholds).num_rejected == 2
    assert procedures.stepdown(late, thresholds).num_rejected == 0


def test_stepup_rejects_all_when_largest_passes():
    outcome = procedures.stepup(PValueSet([0.19, 0.15, 0.01, 0.2]), bh(4, 0.2))
    assert outcome.num_rejected == 4


def test_threshold_equality_rejects():
    outcome = procedures.stepdown(PValueSet([0.0125, 0.5, 0.5, 0.5]), holm(4))
    assert outcome.num_rejected == 1


def test_length_mismatch():
    with pytest.raises(ParameterError):
        procedures.stepdown(PValueSet([0.1, 0.2]), holm(3))
    with pytest.raises(ParameterError):
        procedures.stepup(PValueSet([0.1, 0.2]), holm(3))


def test_apply_dispatch():
    p = PValueSet([0.001, 0.01, 0.02, 0.9])
    assert procedures.apply(p, holm(4), "stepup").mode == "stepup"
    with pytest.raises(ParameterError):
        procedures.apply(p, holm(4), "sideways")


def test_ties_follow_input_order():
    outcome = procedures.stepdown(PValueSet([0.3, 0.001, 0.001, 0.001]), [0.01, 0.01, 0.01, 0.01])
    assert outcome.num_rejected == 3
    assert list(outcome.order[:3]) == [1, 2, 3]


def test_trace():
    p = PValueSet([0.9, 0.001], ids=("b", "a"))
    outcome = procedures.stepdown(p, holm(2))
    trace = outcome.trace
    assert [step.rank for step in trace] == [1, 2]
    assert [step.index for step in trace] == [1, 0]
    assert [step.decision for step in trace] == ["reject", "retain"]
    assert trace[0].threshold == pytest.approx(0.025)
    assert p.label(trace[0].index) == "a"


def test_rejected_mask():
    outcome = procedures.stepdown(PValueSet([0.9, 0.001, 0.002]), holm(3))
    assert outcome.rejected_mask(3).tolist() == [False, True, True]


def _random_instance(rng):
    s = int(rng.integers(1, 40))
    p = PValueSet(rng.random(s) ** rng.uniform(0.5, 4))
    thresholds = np.sort(rng.uniform(0, rng.uniform(0.01, 1), s))
    return p, thresholds


def test_stepup_rejects_superset_of_stepdown():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        p, thresholds = _random_instance(rng)
        down = procedures.stepdown(p, thresholds)
        up = procedures.stepup(p, thresholds)
        assert down.rejected <= up.rejected


def test_larger_constants_never_reject_fewer():
    rng = np.random.default_rng(12)
    for _ in range(2_000):
        p, thresholds = _random_instance(rng)
        bigger = np.minimum(thresholds + rng.uniform(0, 0.1, thresholds.size), 1.0)
        bigger = np.maximum.accumulate(bigger)
        for mode in procedures.MODES:
            assert (procedures.apply(p, bigger, mode).num_rejected
                    >= procedures.apply(p, thresholds, mode).num_rejected)


def test_permutation_equivariance():
    rng = np.random.default_rng(13)
    for _ in range(2_000):
        p, thresholds = _random_instance(rng)
        perm = rng.permutation(p.s)
        shuffled = PValueSet(p.values[perm])
        for mode in procedures.MODES:
            original = procedures.apply(p, thresholds, mode)
            moved = procedures.apply(shuffled, thresholds, mode)
            assert moved.num_rejected == original.num_rejected
            # distinct p-values make the rejected set unique
            if np.unique(p.values).size == p.s:
                assert {int(perm[i]) for i in moved.rejected} == set(original.rejected)

