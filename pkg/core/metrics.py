"""
metrics.py — per-trial error quantities.

Given a RejectionOutcome and the ground truth, report what went wrong in this
one realization: the false discovery proportion, the number of false
rejections, whether at least k true nulls were rejected, and whether the
Simes-type bound event {q_(i) <= i*alpha/|I| for some i <= M} fired.
Averaging over trials happens in workflow/simulation.py.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from core.constants import floor_gamma_times
from core.errors import ParameterError
from core.state_schema import RejectionOutcome, TruthMask, parse_gamma


def _check(outcome: RejectionOutcome, truth: TruthMask) -> None:
    if outcome.order.size != truth.s:
        raise ParameterError(f"outcome covers {outcome.order.size} hypotheses, truth mask {truth.s}")


def false_rejections(outcome: RejectionOutcome, truth: TruthMask) -> int:
    """How many rejected hypotheses are true nulls."""
    _check(outcome, truth)
    rejected = outcome.order[: outcome.num_rejected]
    return int(np.count_nonzero(truth.is_true_null[rejected]))


def fdp(outcome: RejectionOutcome, truth: TruthMask) -> float:
    """False rejections / total rejections, 0 when nothing is rejected."""
    if outcome.num_rejected == 0:
        _check(outcome, truth)
        return 0.0
    return false_rejections(outcome, truth) / outcome.num_rejected


def kfwer_event(outcome: RejectionOutcome, truth: TruthMask, k: int) -> bool:
    """At least k true nulls rejected. k = 1 is the ordinary FWER event."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    return false_rejections(outcome, truth) >= k


def thm32_bound_event(q: Sequence[float], alpha: float, gamma, s: int) -> bool:
    """
    True iff q_(i) <= i*alpha/|I| for some i <= M = min(floor(gamma*s) + 1, |I|).

    q holds the true-null p-values (any order; they are sorted here).
    """
    ordered = np.sort(np.asarray(q, dtype=float))
    size = ordered.size
    if size == 0:
        return False
    m = min(floor_gamma_times(parse_gamma(gamma), s) + 1, size)
    steps = np.arange(1, m + 1)
    return bool(np.any(ordered[:m] <= steps * alpha / size))


def fdp_exceeds(outcome: RejectionOutcome, truth: TruthMask, gamma) -> bool:
    """FDP > gamma, compared on integers so 1/10 against gamma = 0.1 is not an exceedance."""
    if outcome.num_rejected == 0:
        return False
    exact_gamma = parse_gamma(gamma, allow_zero=True)
    wrong = false_rejections(outcome, truth)
    return wrong * exact_gamma.denominator > exact_gamma.numerator * outcome.num_rejected
