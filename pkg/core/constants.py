"""
=============================================================
core/constants.py — Stepdown FDP Toolkit
=============================================================
PURPOSE:
  Builds every critical-value sequence the toolkit knows about
  and the rescaling quantities behind them.

  Sequences (all nondecreasing, all inside [0, 1]):
    holm              alpha / (s - i + 1)
    kfwer             k*alpha/s, then k*alpha/(s + k - i)
    fdp-base          (floor(gamma*i) + 1) alpha / (s + floor(gamma*i) + 1 - i)
    fdp-lr            fdp-base / C_{floor(gamma*s)+1}     (harmonic divisor)
    fdp-improved      fdp-base / D(gamma, s)              (max-S divisor)
    fdp-known-i       fdp-base / S(gamma, s, |I|)         (|I| known)
    rescaled-custom   alpha * delta_i / D(gamma, s; delta)
    eta-i / eta-ii    the delta_i = i/s special case, two divisors
    fdr-stepdown      min{ s alpha / (s - i + 1)^2, 1 }
    fdr-conservative  alpha * min{ s / (s - i + 1)^2, 1 }
    bh-stepup         i alpha / s

  Rescaling quantities:
    beta_m, N(gamma, s, |I|), S(gamma, s, |I|), D(gamma, s)

  Every floor and ceiling involving gamma is done with integer
  arithmetic on the exact rational gamma = a/b. Only the final
  ratios are computed in double precision.
=============================================================
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from core.errors import ParameterError
from core.state_schema import (
    ControlParams,
    CriticalSequence,
    DResult,
    HeadroomReport,
    Recipe,
    parse_gamma,
)

logger = logging.getLogger(__name__)

__all__ = [
    "parse_gamma", "floor_gamma_times", "ceil_over_gamma", "harmonic",
    "holm_constants", "kfwer_constants", "fdp_base_constants", "fdp_lr_constants",
    "beta_sequence", "n_cap", "s_value", "d_value", "fdp_improved_constants",
    "known_i_constants", "rescale_custom", "eta_constants", "fdr_stepdown_constants",
    "bh_stepup_constants", "convert_levels", "headroom_analysis", "build_constants",
]


# =============================================================
# EXACT INTEGER HELPERS
# =============================================================

def floor_gamma_times(gamma: Fraction, n: int) -> int:
    """floor(gamma * n), exact."""
    return (gamma.numerator * n) // gamma.denominator


def ceil_over_gamma(m: int, gamma: Fraction) -> int:
    """ceil(m / gamma), exact."""
    return -((-m * gamma.denominator) // gamma.numerator)


def _ceil_over_gamma_array(m: np.ndarray, gamma: Fraction) -> np.ndarray:
    return -((-m * gamma.denominator) // gamma.numerator)


@lru_cache(maxsize=None)
def harmonic(j: int) -> float:
    """C_j = 1 + 1/2 + ... + 1/j, with C_0 = 0."""
    if j < 0:
        raise ParameterError(f"harmonic number needs j >= 0, got {j}")
    return math.fsum(1.0 / i for i in range(1, j + 1))


# =============================================================
# SIMPLE CLOSED-FORM SEQUENCES
# =============================================================

def _steps(s: int) -> np.ndarray:
    """1-based step numbers 1..s as floats."""
    return np.arange(1, s + 1, dtype=float)


def _sequence(values, recipe: Recipe, params: ControlParams, **extra) -> CriticalSequence:
    return CriticalSequence(values=[float(v) for v in values], recipe=recipe, params=params, **extra)


def holm_constants(p: ControlParams) -> CriticalSequence:
    """alpha_i = alpha / (s - i + 1)."""
    i = _steps(p.s)
    return _sequence(p.alpha / (p.s - i + 1), Recipe.HOLM, p)


def kfwer_constants(p: ControlParams) -> CriticalSequence:
    """k*alpha/s for the first k steps, k*alpha/(s + k - i) afterwards."""
    if p.k > p.s:  # ControlParams already refuses this; kept for model_construct callers
        raise ParameterError(f"k = {p.k} exceeds s = {p.s}")
    i = _steps(p.s)
    values = np.where(i <= p.k, p.k * p.alpha / p.s, p.k * p.alpha / (p.s + p.k - i))
    return _sequence(values, Recipe.KFWER, p)


def _base_values(s: int, gamma: Fraction, alpha: float) -> np.ndarray:
    """(floor(gamma*i) + 1) alpha / (s + floor(gamma*i) + 1 - i) for i = 1..s."""
    i = np.arange(1, s + 1, dtype=np.int64)
    tolerated = (gamma.numerator * i) // gamma.denominator   # floor(gamma*i), exact
    return (tolerated + 1) * alpha / (s + tolerated + 1 - i)


def fdp_base_constants(p: ControlParams) -> CriticalSequence:
    """The unscaled FDP constants; need a dependence condition to be valid."""
    gamma = p.require_gamma()
    return _sequence(_base_values(p.s, gamma, p.alpha), Recipe.FDP_BASE, p)


def fdp_lr_constants(p: ControlParams) -> CriticalSequence:
    """Base FDP constants divided by the harmonic number C_{floor(gamma*s)+1}."""
    gamma = p.require_gamma()
    divisor = harmonic(floor_gamma_times(gamma, p.s) + 1)
    return _sequence(_base_values(p.s, gamma, p.alpha) / divisor, Recipe.FDP_LR, p, d_used=divisor)


def fdr_stepdown_constants(p: ControlParams, conservative: bool = False) -> CriticalSequence:
    """
    FDR stepdown constants min{s alpha/(s-i+1)^2, 1}.
    With conservative=True: alpha * min{s/(s-i+1)^2, 1}, never above alpha.
    """
    i = _steps(p.s)
    ratio = p.s / (p.s - i + 1) ** 2
    if conservative:
        return _sequence(p.alpha * np.minimum(ratio, 1.0), Recipe.FDR_CONSERVATIVE, p)
    return _sequence(np.minimum(p.alpha * ratio, 1.0), Recipe.FDR_STEPDOWN, p)


def bh_stepup_constants(p: ControlParams) -> CriticalSequence:
    """i alpha / s. Meant for the stepup engine; FDR-valid under independence."""
    return _sequence(_steps(p.s) * p.alpha / p.s, Recipe.BH_STEPUP, p)


# =============================================================
# CLASS: _SProfile
# Index tables for beta_m, N and S at one (s, gamma, deltas).
# Built once, then queried for every |I| in 1..s.
# =============================================================

class _SProfile:
    """
    beta_m (m = 1..g+1, g = floor(gamma*s)) has two definitions:

      no deltas:  beta_m = m / max{s + m - ceil(m/gamma) + 1, |I|}  (m <= g)
                  beta_{g+1} = (g + 1) / |I|
      deltas:     beta_m = delta_{k}, k = min{s, s + m - |I|, ceil(m/gamma) - 1}

    The parts that do not depend on |I| are precomputed here.
    """

    def __init__(self, s: int, gamma: Fraction, deltas: Optional[np.ndarray] = None):
        self.s = s
        self.gamma = gamma
        self.g = floor_gamma_times(gamma, s)
        self.m = np.arange(1, self.g + 2, dtype=np.int64)          # 1..g+1
        self.ceil_m = _ceil_over_gamma_array(self.m, gamma)         # ceil(m/gamma)
        self.deltas = deltas
        # s + m - ceil(m/gamma) + 1 for m = 1..g (always >= m + 1)
        self.base_denominators = s + self.m[:-1] - self.ceil_m[:-1] + 1

    def check_I(self, I: int) -> int:
        if not (1 <= I <= self.s):
            raise ParameterError(f"|I| must lie in [1, {self.s}], got {I}")
        return int(I)

    def beta(self, I: int) -> np.ndarray:
        if self.deltas is None:
            beta = np.empty(self.g + 1, dtype=float)
            beta[:-1] = self.m[:-1] / np.maximum(self.base_denominators, I)
            beta[-1] = (self.g + 1) / I
            return beta
        k = np.minimum(np.minimum(self.s, self.s + self.m - I), self.ceil_m - 1)
        return self.deltas[k - 1]

    def n_cap(self, I: int) -> int:
        a, b = self.gamma.numerator, self.gamma.denominator
        # floor(gamma * ((s - I)/(1 - gamma) + 1)) = floor(a((s-I)b + b - a) / (b(b - a)))
        third = (a * ((self.s - I) * b + (b - a))) // (b * (b - a)) + 1
        return int(min(self.g + 1, I, third))

    def partial_sum(self, I: int, upto: int) -> float:
        """|I| * sum_{i <= upto} (beta_i - beta_{i-1}) / i."""
        beta = self.beta(I)[:upto]
        increments = np.diff(beta, prepend=0.0)
        return float(I * np.sum(increments / self.m[:upto]))

    def s_value(self, I: int) -> float:
        return self.partial_sum(I, self.n_cap(I))


def _clean_deltas(deltas: Sequence[float], s: int, allow_rescale: bool) -> tuple[np.ndarray, Optional[float]]:
    """Check a custom delta sequence; optionally rescale it into [0, 1] by its maximum."""
    values = np.asarray(deltas, dtype=float)
    if values.ndim != 1 or values.size != s:
        raise ParameterError(f"deltas must hold exactly s = {s} values, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise ParameterError("deltas must be finite")
    if np.any(np.diff(values) < 0):
        raise ParameterError("deltas must be nondecreasing")
    if values[0] < 0:
        raise ParameterError("deltas must be nonnegative")
    top = float(values[-1])
    if top > 1.0:
        if not allow_rescale:
            raise ParameterError("deltas must lie in [0, 1]")
        return values / top, top
    return values, None


def _profile(p: ControlParams, deltas: Optional[Sequence[float]], allow_rescale: bool = False):
    gamma = p.require_gamma()
    cleaned, scale = (None, None) if deltas is None else _clean_deltas(deltas, p.s, allow_rescale)
    return _SProfile(p.s, gamma, cleaned), scale


# =============================================================
# RESCALING QUANTITIES
# =============================================================

def beta_sequence(p: ControlParams, deltas: Optional[Sequence[float]] = None, I: int = 1) -> list[float]:
    """(beta_1, ..., beta_{floor(gamma*s)+1}) for the given |I|."""
    profile, _ = _profile(p, deltas)
    return [float(v) for v in profile.beta(profile.check_I(I))]


def n_cap(p: ControlParams, I: int) -> int:
    """N(gamma, s, |I|): how many beta terms can matter."""
    profile, _ = _profile(p, None)
    return profile.n_cap(profile.check_I(I))


def s_value(p: ControlParams, deltas: Optional[Sequence[float]] = None, I: int = 1) -> float:
    """S(gamma, s, |I|) = |I| sum_{i=1}^{N} (beta_i - beta_{i-1}) / i."""
    profile, _ = _profile(p, deltas)
    return profile.s_value(profile.check_I(I))


def _maximize(profile: _SProfile, keep_per_I: bool) -> DResult:
    sizes = range(1, profile.s + 1)
    rows = [(I, profile.n_cap(I), profile.s_value(I)) for I in sizes]
    best = max(row[2] for row in rows)
    cutoff = best - 1e-12 * abs(best)
    argmax = next(I for I, _, value in rows if value >= cutoff)   # smallest |I| on ties
    d = next(value for I, _, value in rows if I == argmax)
    logger.debug("D(gamma=%s, s=%d) = %.6g at |I| = %d", profile.gamma, profile.s, d, argmax)
    return DResult(d=d, argmax_I=argmax, per_I=rows if keep_per_I else None)


def d_value(p: ControlParams, deltas: Optional[Sequence[float]] = None, keep_per_I: bool = False) -> DResult:
    """D(gamma, s) = max over |I| in 1..s of S(gamma, s, |I|)."""
    profile, _ = _profile(p, deltas)
    return _maximize(profile, keep_per_I)


# =============================================================
# RESCALED FDP SEQUENCES
# =============================================================

def fdp_improved_constants(p: ControlParams) -> CriticalSequence:
    """Base FDP constants divided by D(gamma, s); valid under any dependence."""
    gamma = p.require_gamma()
    d = d_value(p).d
    return _sequence(_base_values(p.s, gamma, p.alpha) / d, Recipe.FDP_IMPROVED, p, d_used=d)


def known_i_constants(p: ControlParams, I: int) -> CriticalSequence:
    """Base FDP constants divided by S(gamma, s, |I|) for a known |I|."""
    gamma = p.require_gamma()
    divisor = s_value(p, None, I)
    values = np.minimum(_base_values(p.s, gamma, p.alpha) / divisor, 1.0)
    return _sequence(values, Recipe.FDP_KNOWN_I, p, d_used=divisor)


def rescale_custom(p: ControlParams, deltas: Sequence[float]) -> CriticalSequence:
    """
    alpha * delta_i / D(gamma, s; delta) for any nondecreasing delta.
    Deltas above 1 are first divided by their maximum (the result does not
    change, D scales with the deltas) and the factor is reported.
    """
    profile, scale = _profile(p, deltas, allow_rescale=True)
    d = _maximize(profile, keep_per_I=False).d
    if d <= 0.0:
        raise ParameterError("deltas give D = 0; no rescaling is possible")
    values = np.minimum(p.alpha * profile.deltas / d, 1.0)
    return _sequence(values, Recipe.RESCALED_CUSTOM, p, d_used=d, delta_scale=scale)


def eta_constants(p: ControlParams, variant: str = "i") -> CriticalSequence:
    """
    The delta_i = i/s sequence made FDP-safe.
      variant "i":  alpha * eta_i / D(gamma, s; eta)
      variant "ii": alpha * eta_i / ((1/gamma) max{C_floor(gamma*s), 1})
    """
    gamma = p.require_gamma()
    eta = _steps(p.s) / p.s
    if variant == "i":
        d = d_value(p, eta).d
        return _sequence(np.minimum(p.alpha * eta / d, 1.0), Recipe.ETA_I, p, d_used=d)
    if variant == "ii":
        divisor = max(harmonic(floor_gamma_times(gamma, p.s)), 1.0) / float(gamma)
        return _sequence(p.alpha * eta / divisor, Recipe.ETA_II, p, d_used=divisor)
    raise ParameterError(f"eta variant must be 'i' or 'ii', got {variant!r}")


# =============================================================
# LEVEL CONVERSION BETWEEN FDR AND FDP CONTROL
# =============================================================

def convert_levels(direction: str, gamma, level: float) -> float:
    """
    fdr_to_fdp: FDR <= q  gives  P{FDP > gamma} <= q / gamma (capped at 1).
    fdp_to_fdr: P{FDP > gamma} <= a  gives  FDR <= a (1 - gamma) + gamma.
    """
    exact_gamma = parse_gamma(gamma, allow_zero=True)
    if not (0.0 <= level <= 1.0):
        raise ParameterError(f"level must lie in [0, 1], got {level}")
    if direction == "fdr_to_fdp":
        if exact_gamma == 0:
            raise ParameterError("fdr_to_fdp needs gamma > 0")
        return min(level / float(exact_gamma), 1.0)
    if direction == "fdp_to_fdr":
        g = float(exact_gamma)
        return level * (1.0 - g) + g
    raise ParameterError(f"direction must be 'fdr_to_fdp' or 'fdp_to_fdr', got {direction!r}")


# =============================================================
# HEADROOM: how far 1/D is from the best possible multiplier
# =============================================================

def headroom_analysis(p: ControlParams) -> HeadroomReport:
    """
    At the maximizing |I|, the adversarial construction can fire at steps
    i <= N whose ceil(i/gamma) - 1 zeros fit among the s - |I| false nulls.
    Its exceedance probability is alpha times the returned lower bound, so
    D / lower_bound is the most any constant multiple could still gain.
    """
    profile, _ = _profile(p, None)
    best = _maximize(profile, keep_per_I=False)
    size = best.argmax_I
    cap = profile.n_cap(size)
    room = p.s - size
    trigger_steps = sum(1 for i in range(1, cap + 1) if ceil_over_gamma(i, profile.gamma) - 1 <= room)
    lower = profile.partial_sum(size, trigger_steps) if trigger_steps else 0.0
    headroom = best.d / lower if lower > 0 else math.inf
    return HeadroomReport(
        s=p.s, gamma=profile.gamma, argmax_I=size, n_cap=cap, d=best.d,
        trigger_steps=trigger_steps, lower_bound=lower, headroom=headroom,
    )


# =============================================================
# DISPATCH
# =============================================================

def build_constants(
    recipe: Recipe | str,
    params: ControlParams,
    deltas: Optional[Sequence[float]] = None,
    conservative: bool = False,
    known_I: Optional[int] = None,
) -> CriticalSequence:
    """Build the sequence for a recipe tag."""
    try:
        recipe = Recipe(recipe)
    except ValueError as tag_error:
        raise ParameterError(f"unknown recipe {recipe!r}") from tag_error

    if recipe is Recipe.HOLM:
        return holm_constants(params)
    if recipe is Recipe.KFWER:
        return kfwer_constants(params)
    if recipe is Recipe.FDP_BASE:
        return fdp_base_constants(params)
    if recipe is Recipe.FDP_LR:
        return fdp_lr_constants(params)
    if recipe is Recipe.FDP_IMPROVED:
        return fdp_improved_constants(params)
    if recipe is Recipe.FDP_KNOWN_I:
        if known_I is None:
            raise ParameterError("fdp-known-i needs the number of true nulls")
        return known_i_constants(params, known_I)
    if recipe is Recipe.RESCALED_CUSTOM:
        if deltas is None:
            raise ParameterError("rescaled-custom needs a deltas sequence")
        return rescale_custom(params, deltas)
    if recipe is Recipe.ETA_I:
        return eta_constants(params, "i")
    if recipe is Recipe.ETA_II:
        return eta_constants(params, "ii")
    if recipe is Recipe.FDR_STEPDOWN:
        return fdr_stepdown_constants(params, conservative=conservative)
    if recipe is Recipe.FDR_CONSERVATIVE:
        return fdr_stepdown_constants(params, conservative=True)
    return bh_stepup_constants(params)
