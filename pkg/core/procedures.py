"""
=============================================================
core/procedures.py — Stepdown FDP Toolkit
=============================================================
PURPOSE:
  Applies a critical sequence to a set of p-values.

  stepdown: walk up from the smallest p-value and stop at the
            first p_(i) > alpha_i; reject everything before it.
  stepup:   walk down from the largest p-value and stop at the
            first p_(r) <= alpha_r; reject it and everything below.

  Ordering is a stable sort on (p-value, input position), so ties
  always resolve the same way. A p-value equal to its threshold
  is rejected.
=============================================================
"""

from __future__ import annotations

import numpy as np

from core.errors import ParameterError
from core.state_schema import CriticalSequence, PValueSet, RejectionOutcome

STEPDOWN = "stepdown"
STEPUP = "stepup"
MODES = (STEPDOWN, STEPUP)


def _ordered(p: PValueSet, c: CriticalSequence | np.ndarray):
    thresholds = c.as_array() if isinstance(c, CriticalSequence) else np.asarray(c, dtype=float)
    if thresholds.size != p.s:
        raise ParameterError(f"{p.s} p-values but {thresholds.size} critical values")
    order = np.argsort(p.values, kind="stable")
    sorted_values = p.values[order]
    return order, sorted_values, thresholds, sorted_values <= thresholds


def _outcome(r: int, mode: str, order, sorted_values, thresholds) -> RejectionOutcome:
    return RejectionOutcome(
        num_rejected=int(r),
        rejected=frozenset(int(i) for i in order[:r]),
        mode=mode,
        order=order,
        sorted_values=sorted_values,
        thresholds=thresholds,
    )


def stepdown(p: PValueSet, c: CriticalSequence | np.ndarray) -> RejectionOutcome:
    """Reject the r smallest p-values, r the largest with p_(i) <= alpha_i for all i <= r."""
    order, sorted_values, thresholds, passes = _ordered(p, c)
    failures = np.flatnonzero(~passes)
    r = failures[0] if failures.size else p.s
    return _outcome(r, STEPDOWN, order, sorted_values, thresholds)


def stepup(p: PValueSet, c: CriticalSequence | np.ndarray) -> RejectionOutcome:
    """Reject the r smallest p-values, r the largest index with p_(r) <= alpha_r (0 if none)."""
    order, sorted_values, thresholds, passes = _ordered(p, c)
    hits = np.flatnonzero(passes)
    r = hits[-1] + 1 if hits.size else 0
    return _outcome(r, STEPUP, order, sorted_values, thresholds)


def apply(p: PValueSet, c: CriticalSequence | np.ndarray, mode: str = STEPDOWN) -> RejectionOutcome:
    """Run the procedure named by `mode`."""
    if mode == STEPDOWN:
        return stepdown(p, c)
    if mode == STEPUP:
        return stepup(p, c)
    raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")

