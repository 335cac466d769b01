"""
=============================================================
workflow/simulation.py — Stepdown FDP Toolkit
=============================================================
PURPOSE:
  Seeded Monte Carlo harness. Every trial runs

      scenario.draw  →  stepdown / stepup  →  per-trial metrics

  and the report averages them:

      p_fdp_exceeds_gamma   P{FDP > gamma}          (needs gamma)
      fdr                   E[FDP]
      p_kfwer               P{at least k false rejections}
      mean_rejections       E[number of rejections]
      p_thm32_bound         P{Simes-type bound event} (needs gamma)

  Trial t always draws from trial_stream(seed, t), so the report
  is the same for one worker or many. Per-trial values are kept
  in trial order and summed with math.fsum.
=============================================================
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from core.constants import build_constants
from core.errors import ParameterError
from core.metrics import fdp, fdp_exceeds, false_rejections, thm32_bound_event
from core.procedures import MODES, apply
from core.state_schema import ControlParams, CriticalSequence, MetricEstimate, Recipe, SimulationReport
from scenarios.rng import trial_stream
from scenarios.samplers import Scenario

logger = logging.getLogger(__name__)

# ── metric names ─────────────────────────────────────────────
P_FDP_EXCEEDS = "p_fdp_exceeds_gamma"
FDR = "fdr"
P_KFWER = "p_kfwer"
MEAN_REJECTIONS = "mean_rejections"
P_THM32_BOUND = "p_thm32_bound"

EVENT_METRICS = (P_FDP_EXCEEDS, P_KFWER, P_THM32_BOUND)   # SE = sqrt(p(1-p)/n)
_COLUMNS = (P_FDP_EXCEEDS, FDR, P_KFWER, MEAN_REJECTIONS, P_THM32_BOUND)

DEFAULT_TRIALS = 200_000


# ═══════════════════════════════════════════════════════════════
#  PER-TRIAL WORK (top-level so worker processes can pickle it)
# ═══════════════════════════════════════════════════════════════

def _run_trials(
    scenario: Scenario,
    thresholds: np.ndarray,
    mode: str,
    params: ControlParams,
    seed: int,
    start: int,
    stop: int,
) -> np.ndarray:
    """Rows of (fdp > gamma, fdp, k-FWER event, rejections, bound event) for trials start..stop-1."""
    rows = np.zeros((stop - start, len(_COLUMNS)), dtype=float)
    gamma = params.gamma
    for row, trial in enumerate(range(start, stop)):
        p_values, truth = scenario.draw(trial_stream(seed, trial))
        outcome = apply(p_values, thresholds, mode)
        rows[row, 1] = fdp(outcome, truth)
        rows[row, 2] = false_rejections(outcome, truth) >= params.k
        rows[row, 3] = outcome.num_rejected
        if gamma is not None:
            rows[row, 0] = fdp_exceeds(outcome, truth, gamma)
            rows[row, 4] = thm32_bound_event(p_values.values[truth.is_true_null], params.alpha, gamma, params.s)
    return rows


def _chunks(trials: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(start, min(start + chunk_size, trials)) for start in range(0, trials, chunk_size)]


def _estimate(column: Sequence[float], event: bool) -> MetricEstimate:
    n = len(column)
    mean = math.fsum(column) / n
    if event:
        se = math.sqrt(max(mean * (1.0 - mean), 0.0) / n)
    elif n > 1:
        se = math.sqrt(math.fsum((x - mean) ** 2 for x in column) / (n - 1) / n)
    else:
        se = 0.0
    return MetricEstimate(mean=mean, se=se)


# ═══════════════════════════════════════════════════════════════
#  PUBLIC API
# ═══════════════════════════════════════════════════════════════

def run(
    scenario: Scenario,
    recipe: Recipe | str,
    mode: str,
    params: ControlParams,
    trials: int,
    seed: int,
    workers: int = 1,
    chunk_size: Optional[int] = None,
    constants: Optional[CriticalSequence] = None,
    deltas: Optional[Sequence[float]] = None,
    known_I: Optional[int] = None,
) -> SimulationReport:
    """
    Estimate the error rates of one (scenario, constants, mode) triple.
    `constants` skips the recipe build when the caller already has them.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if scenario.s != params.s:
        raise ParameterError(f"scenario {scenario.name.value} has s = {scenario.s} but parameters say s = {params.s}")
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")

    sequence = constants if constants is not None else build_constants(recipe, params, deltas, known_I=known_I)
    thresholds = sequence.as_array()
    size = chunk_size or max(1, math.ceil(trials / (workers * 4)))
    ranges = _chunks(trials, size)

    logger.info("🎲 %s: %d trials of %s/%s on %d worker(s)",
                scenario.name.value, trials, sequence.recipe.value, mode, workers)

    if workers == 1:
        parts = [_run_trials(scenario, thresholds, mode, params, seed, lo, hi) for lo, hi in ranges]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_trials, scenario, thresholds, mode, params, seed, lo, hi) for lo, hi in ranges]
            parts = [future.result() for future in futures]     # trial order
    table = np.concatenate(parts, axis=0)

    estimates = {}
    for position, name in enumerate(_COLUMNS):
        if params.gamma is None and name in (P_FDP_EXCEEDS, P_THM32_BOUND):
            continue
        estimates[name] = _estimate(table[:, position].tolist(), name in EVENT_METRICS)

    report = SimulationReport(
        trials=trials,
        estimates=estimates,
        scenario=scenario.model_dump(mode="json"),
        recipe=sequence.recipe.value,
        mode=mode,
        params=params,
        seed=seed,
    )
    summary = ", ".join(f"{name}={value.mean:.6g}±{value.se:.2g}" for name, value in estimates.items())
    logger.info("✅ %s", summary)
    return report


def guarantee_check(report: SimulationReport, metric: str, level: float) -> bool:
    """Estimate <= level + 3 SE."""
    estimate = report.estimate(metric)
    return estimate.mean <= level + 3.0 * estimate.se


def violation_check(report: SimulationReport, metric: str, bound: float) -> bool:
    """Estimate >= bound - 3 SE."""
    estimate = report.estimate(metric)
    return estimate.mean >= bound - 3.0 * estimate.se
