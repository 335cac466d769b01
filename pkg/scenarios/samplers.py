"""
=============================================================
scenarios/samplers.py — Stepdown FDP Toolkit
=============================================================
PURPOSE:
  Seeded generators of (p-values, truth mask) pairs.

  Benign models:
    independent       uniform true nulls, false nulls from an
                      alternative law ("point:eps" or "power:a")
    equicorrelated    one-factor Gaussian latent variables,
                      one-sided p-values

  Adversarial constructions:
    lemma31           joint law of all-true-null p-values that
                      attains the union bound for given betas
    example31         s = 100, gamma = 0.1: breaks the unscaled
                      FDP constants at about 1.48 alpha
    remark31          the headroom construction (s = 1000,
                      gamma = 0.1 by default, any s and gamma)
    example41         s = 3: breaks the FDR stepdown constants
                      at 13 alpha / 12

  True nulls always occupy the first |I| positions.
  Each sampler takes either an integer seed or a numpy Generator.
=============================================================
"""

from __future__ import annotations

import logging
import math
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Any, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import ndtr

from core.constants import beta_sequence, ceil_over_gamma, fdp_base_constants, floor_gamma_times, headroom_analysis
from core.errors import ParameterError
from core.state_schema import ControlParams, PValueSet, TruthMask, parse_gamma
from scenarios.rng import RandomSource, as_generator, make_rng

logger = logging.getLogger(__name__)


# ── helpers ──────────────────────────────────────────────────

def _truth(s: int, I: int) -> TruthMask:
    mask = np.zeros(s, dtype=bool)
    mask[:I] = True
    return TruthMask(mask)


def _check_sizes(s: int, I: int) -> None:
    if s < 1:
        raise ParameterError(f"s must be >= 1, got {s}")
    if not (0 <= I <= s):
        raise ParameterError(f"I must lie in [0, {s}], got {I}")


def _uniform_on(rng: np.random.Generator, lo: float, hi: float, size: int) -> np.ndarray:
    """Uniform on the half-open interval (lo, hi]."""
    return lo + (hi - lo) * (1.0 - rng.random(size))


def parse_alt_law(alt_law: str) -> tuple[str, float]:
    """'point:0.001' -> ('point', 0.001); 'power:4' -> ('power', 4.0)."""
    kind, _, raw = str(alt_law).partition(":")
    kind = kind.strip().lower()
    try:
        value = float(raw) if raw else 0.0
    except ValueError as number_error:
        raise ParameterError(f"alt_law {alt_law!r}: {raw!r} is not a number") from number_error
    if kind == "point":
        if not (0.0 <= value <= 1.0):
            raise ParameterError(f"point-mass location must lie in [0, 1], got {value}")
        return kind, value
    if kind == "power":
        if not value > 1.0:
            raise ParameterError(f"power-law exponent must exceed 1, got {value}")
        return kind, value
    raise ParameterError(f"alt_law must be 'point:<eps>' or 'power:<a>', got {alt_law!r}")


# =============================================================
# BENIGN MODELS
# =============================================================

def sample_independent(s: int, I: int, alt_law: str = "point:0", seed: RandomSource = 0):
    """
    True nulls iid uniform(0,1). False nulls iid from alt_law, independent of them:
      point:eps  every false p-value equals eps
      power:a    CDF u^(1/a), drawn as U^a (smaller than uniform for a > 1)
    """
    _check_sizes(s, I)
    kind, value = parse_alt_law(alt_law)
    rng = as_generator(seed)
    values = np.empty(s, dtype=float)
    values[:I] = rng.random(I)
    if kind == "point":
        values[I:] = value
    else:
        values[I:] = rng.random(s - I) ** value
    return PValueSet(values), _truth(s, I)


def sample_equicorrelated_gaussian(
    s: int,
    I: int,
    rho: float,
    shift: float = 3.0,
    seed: RandomSource = 0,
    couple_false: bool = True,
):
    """
    Z_i = sqrt(rho) W + sqrt(1 - rho) e_i, p_i = 1 - Phi(Z_i).
    False nulls use Z_i + shift. With couple_false=False they get their own
    common factor, so the true-null block is independent of the false one.
    """
    _check_sizes(s, I)
    if not (0.0 <= rho < 1.0):
        raise ParameterError(f"rho must lie in [0, 1), got {rho}")
    rng = as_generator(seed)
    common = rng.standard_normal()
    noise = rng.standard_normal(s)
    latent = math.sqrt(rho) * common + math.sqrt(1.0 - rho) * noise
    if not couple_false and I < s:
        own_common = rng.standard_normal()
        latent[I:] = math.sqrt(rho) * own_common + math.sqrt(1.0 - rho) * noise[I:]
    latent[I:] += shift
    return PValueSet(ndtr(-latent)), _truth(s, I)


# =============================================================
# SHARP CONSTRUCTION FOR THE UNION BOUND
# =============================================================

def union_bound(t: int, betas: Sequence[float]) -> float:
    """t * sum_i (beta_i - beta_{i-1}) / i with beta_0 = 0."""
    levels = np.asarray(betas, dtype=float)
    increments = np.diff(levels, prepend=0.0)
    return float(t * math.fsum(increments / np.arange(1, levels.size + 1)))


def _check_betas(t: int, betas: Sequence[float]) -> np.ndarray:
    levels = np.asarray(betas, dtype=float)
    if t < 1:
        raise ParameterError(f"t must be >= 1, got {t}")
    if levels.ndim != 1 or levels.size == 0:
        raise ParameterError("betas must be a non-empty list")
    if levels.size > t:
        raise ParameterError(f"{levels.size} betas but only t = {t} coordinates")
    if levels[0] < 0 or levels[-1] > 1 or np.any(np.diff(levels) < 0):
        raise ParameterError("betas must be nondecreasing inside [0, 1]")
    bound = union_bound(t, levels)
    if bound > 1.0 + 1e-12:
        raise ParameterError(f"union bound {bound:.6g} exceeds 1; the sharp law does not exist")
    return levels


def sample_lemma31_sharp(t: int, betas: Sequence[float], seed: RandomSource = 0) -> PValueSet:
    """
    With probability t (beta_i - beta_{i-1}) / i pick event A_i: a random
    i-subset gets iid uniforms on (beta_{i-1}, beta_i], the others iid
    uniforms on (beta_m, 1]. Otherwise all t are uniform on (beta_m, 1].

    Every coordinate is exactly uniform(0,1) and
    P{p_(i) <= beta_i for some i} equals union_bound(t, betas).
    """
    levels = _check_betas(t, betas)
    m = levels.size
    rng = as_generator(seed)

    event_probs = t * np.diff(levels, prepend=0.0) / np.arange(1, m + 1)
    pick = int(np.searchsorted(np.cumsum(event_probs), rng.random(), side="right"))

    values = _uniform_on(rng, float(levels[-1]), 1.0, t)
    if pick < m:                                   # event A_{pick+1}
        size = pick + 1
        lower = float(levels[pick - 1]) if pick > 0 else 0.0
        chosen = rng.choice(t, size=size, replace=False)
        values[chosen] = _uniform_on(rng, lower, float(levels[pick]), size)
    return PValueSet(values)


# =============================================================
# ADVERSARIAL EXAMPLES
# =============================================================

EXAMPLE31_S = 100
EXAMPLE31_I = 90
EXAMPLE31_ZEROS = 8


def sample_example31(alpha: float, seed: RandomSource = 0):
    """
    s = 100, gamma = 0.1, |I| = 90. The true nulls follow the sharp law for
    the base FDP constants at steps 9 and 11 (alpha/92, 2 alpha/91). Eight
    false p-values are 0; the last two are 1 when q_(1) <= alpha/92, else 0.
    """
    params = ControlParams(s=EXAMPLE31_S, gamma=Fraction(1, 10), alpha=alpha)
    base = fdp_base_constants(params).values
    betas = (base[8], base[10])                    # alpha/92, 2 alpha/91
    rng = as_generator(seed)
    true_values = sample_lemma31_sharp(EXAMPLE31_I, betas, rng).values

    values = np.zeros(EXAMPLE31_S, dtype=float)
    values[:EXAMPLE31_I] = true_values
    if true_values.min() <= betas[0]:
        values[EXAMPLE31_I + EXAMPLE31_ZEROS:] = 1.0
    return PValueSet(values), _truth(EXAMPLE31_S, EXAMPLE31_I)


@lru_cache(maxsize=32)
def _remark31_layout(s: int, gamma: Fraction) -> tuple[int, tuple[float, ...], tuple[int, ...]]:
    """
    (|I|, unscaled betas for the trigger steps, zeros to place per trigger step).

    Trigger step i gets ceil(i/gamma) - 1 - i zeros, so the i-th true null
    sits at step ceil(i/gamma) - 1, where the unscaled threshold is alpha beta_i.
    """
    params = ControlParams(s=s, gamma=gamma, alpha=0.5)   # alpha does not enter the layout
    report = headroom_analysis(params)
    if report.trigger_steps == 0:
        raise ParameterError(f"no trigger step fits for s = {s}, gamma = {gamma}")
    betas = beta_sequence(params, None, report.argmax_I)[: report.trigger_steps]
    zeros = tuple(ceil_over_gamma(i, gamma) - 1 - i for i in range(1, report.trigger_steps + 1))
    logger.debug("remark31 layout s=%d gamma=%s: |I|=%d, %d trigger steps",
                 s, gamma, report.argmax_I, report.trigger_steps)
    return report.argmax_I, tuple(betas), zeros


def sample_remark31(alpha: float, seed: RandomSource = 0, s: int = 1000, gamma="0.1"):
    """
    The |I| that attains D gets the sharp law for alpha * beta_1..beta_t.
    At the first i with q_(i) <= alpha beta_i, ceil(i/gamma) - 1 - i false
    p-values are set to 0 and the rest to 1; with no trigger all are 1.
    Stepdown with the unscaled FDP constants then ends with FDP > gamma
    whenever it rejects the i triggered true nulls.
    """
    exact_gamma = parse_gamma(gamma)
    size, betas, zeros = _remark31_layout(int(s), exact_gamma)
    scaled = alpha * np.asarray(betas)
    rng = as_generator(seed)
    true_values = sample_lemma31_sharp(size, scaled, rng).values

    values = np.ones(s, dtype=float)
    values[:size] = true_values
    ordered = np.sort(true_values)[: scaled.size]
    fired = np.flatnonzero(ordered <= scaled)
    if fired.size:
        values[size: size + zeros[int(fired[0])]] = 0.0
    return PValueSet(values), _truth(s, size)


EXAMPLE41_ALPHA_LIMIT = 4.0 / 9.0
_OFF_DIAGONAL = [(i, j) for i in range(3) for j in range(3) if i != j]


def sample_example41(alpha: float, seed: RandomSource = 0):
    """
    s = 3, |I| = 2. (q_1, q_2) is uniform on I_i x I_j with probability 1/6
    for each i != j, where I_1, I_2, I_3 are the thirds of (0, 1].
    The false p-value is 1 if min(q) <= alpha/3, else 0.
    """
    if not (0.0 < alpha < EXAMPLE41_ALPHA_LIMIT):
        raise ParameterError(f"example41 needs 0 < alpha < 4/9, got {alpha}")
    rng = as_generator(seed)
    first, second = _OFF_DIAGONAL[int(rng.integers(len(_OFF_DIAGONAL)))]
    offsets = 1.0 - rng.random(2)                  # (0, 1]
    q = np.array([(first + offsets[0]) / 3.0, (second + offsets[1]) / 3.0])
    false_value = 1.0 if q.min() <= alpha / 3.0 else 0.0
    return PValueSet(np.array([q[0], q[1], false_value])), _truth(3, 2)


# =============================================================
# SCENARIO RECORD
# =============================================================

class ScenarioName(str, Enum):
    INDEPENDENT = "independent"
    EQUICORRELATED = "equicorrelated"
    LEMMA31 = "lemma31"
    EXAMPLE31 = "example31"
    REMARK31 = "remark31"
    EXAMPLE41 = "example41"


class Scenario(BaseModel):
    """A named sampler plus everything it needs; `draw` produces one trial."""

    model_config = ConfigDict(frozen=True)

    name: ScenarioName
    s: int = Field(ge=1)
    I: int = Field(ge=0)
    seed: int = Field(default=0, ge=0)
    params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _sizes(self) -> "Scenario":
        if self.I > self.s:
            raise ParameterError(f"I = {self.I} exceeds s = {self.s}")
        return self

    def draw(self, rng: RandomSource):
        """One (PValueSet, TruthMask) draw from the given generator or seed."""
        p = self.params
        if self.name is ScenarioName.INDEPENDENT:
            return sample_independent(self.s, self.I, p.get("alt_law", "point:0"), rng)
        if self.name is ScenarioName.EQUICORRELATED:
            return sample_equicorrelated_gaussian(
                self.s, self.I, p["rho"], p.get("shift", 3.0), rng, p.get("couple_false", True)
            )
        if self.name is ScenarioName.LEMMA31:
            return sample_lemma31_sharp(self.s, p["betas"], rng), _truth(self.s, self.s)
        if self.name is ScenarioName.EXAMPLE31:
            return sample_example31(p["alpha"], rng)
        if self.name is ScenarioName.REMARK31:
            return sample_remark31(p["alpha"], rng, self.s, p["gamma"])
        return sample_example41(p["alpha"], rng)

    def sample(self):
        """One draw from the scenario's own seed."""
        return self.draw(make_rng(self.seed))


def build_scenario(
    name: ScenarioName | str,
    params: Optional[ControlParams] = None,
    *,
    I: Optional[int] = None,
    seed: int = 0,
    **overrides,
) -> Scenario:
    """
    Fill in a Scenario from control parameters.

    independent / equicorrelated: s from params, I defaults to s.
    lemma31: t = s, betas default to the first floor(gamma*s)+1 base FDP constants.
    example31 / example41: fixed sizes; alpha from params.
    remark31: s and gamma from params (1000 and 0.1 without params).
    """
    try:
        name = ScenarioName(name)
    except ValueError as name_error:
        choices = ", ".join(member.value for member in ScenarioName)
        raise ParameterError(f"unknown scenario {name!r}; choose from {choices}") from name_error

    alpha = overrides.pop("alpha", params.alpha if params is not None else None)

    if name in (ScenarioName.INDEPENDENT, ScenarioName.EQUICORRELATED):
        if params is None:
            raise ParameterError(f"{name.value} needs s")
        size = params.s if I is None else I
        extra = {"alt_law": overrides.pop("alt_law", "point:0")} if name is ScenarioName.INDEPENDENT else {
            "rho": float(overrides.pop("rho", 0.5)),
            "shift": float(overrides.pop("shift", 3.0)),
            "couple_false": bool(overrides.pop("couple_false", True)),
        }
        _reject_leftovers(name, overrides)
        return Scenario(name=name, s=params.s, I=size, seed=seed, params=extra)

    if name is ScenarioName.LEMMA31:
        if params is None:
            raise ParameterError("lemma31 needs s")
        betas = overrides.pop("betas", None)
        if betas is None:
            gamma = params.require_gamma()
            betas = fdp_base_constants(params).values[: floor_gamma_times(gamma, params.s) + 1]
        _reject_leftovers(name, overrides)
        _check_betas(params.s, betas)
        return Scenario(name=name, s=params.s, I=params.s, seed=seed, params={"betas": [float(b) for b in betas]})

    if alpha is None:
        raise ParameterError(f"{name.value} needs alpha")

    if name is ScenarioName.EXAMPLE31:
        _reject_leftovers(name, overrides)
        return Scenario(name=name, s=EXAMPLE31_S, I=EXAMPLE31_I, seed=seed, params={"alpha": alpha})

    if name is ScenarioName.REMARK31:
        s = overrides.pop("s", params.s if params is not None else 1000)
        gamma = overrides.pop("gamma", params.gamma if params is not None and params.gamma is not None else "0.1")
        _reject_leftovers(name, overrides)
        exact_gamma = parse_gamma(gamma)
        size, _, _ = _remark31_layout(int(s), exact_gamma)
        return Scenario(name=name, s=int(s), I=size, seed=seed, params={"alpha": alpha, "gamma": str(exact_gamma)})

    _reject_leftovers(name, overrides)
    if not (0.0 < alpha < EXAMPLE41_ALPHA_LIMIT):
        raise ParameterError(f"example41 needs 0 < alpha < 4/9, got {alpha}")
    return Scenario(name=name, s=3, I=2, seed=seed, params={"alpha": alpha})


def _reject_leftovers(name: ScenarioName, overrides: dict) -> None:
    if overrides:
        raise ParameterError(f"{name.value} does not take {sorted(overrides)}")
