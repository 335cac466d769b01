"""
state_schema.py — Shared data shapes for the Stepdown FDP Toolkit.

Every module hands these objects to the next one:
  constants  → CriticalSequence / DResult / HeadroomReport
  scenarios  → PValueSet + TruthMask
  procedures → RejectionOutcome
  simulation → SimulationReport

The "configuration-like" shapes are pydantic models (validated once, easy to
dump to JSON). The per-trial shapes are small frozen dataclasses over numpy
arrays because the Monte Carlo loop builds hundreds of thousands of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from core.errors import ParameterError


SCHEMA_VERSION = 1


# ═══════════════════════════════════════════════════════════════
#  EXACT GAMMA PARSING
# ═══════════════════════════════════════════════════════════════

def parse_gamma(value, *, allow_zero: bool = False) -> Fraction:
    """
    Turn a user-supplied gamma into an exact rational.

    "0.1" → 1/10, "1/3" → 1/3, Fraction passes through. A float goes through
    its shortest repr first, so 0.1 becomes 1/10 and not the binary value
    0.1000000000000000055...
    """
    if isinstance(value, bool):
        raise ParameterError(f"gamma must be a number, got {value!r}")
    if isinstance(value, Fraction):
        gamma = value
    elif isinstance(value, int):
        gamma = Fraction(value)
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise ParameterError(f"gamma must be finite, got {value!r}")
        gamma = Fraction(repr(value))
    elif isinstance(value, str):
        try:
            gamma = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as parse_error:
            raise ParameterError(f"gamma {value!r} is not a decimal or p/q string") from parse_error
    else:
        raise ParameterError(f"gamma must be a decimal string or Fraction, got {type(value).__name__}")

    lower_ok = gamma >= 0 if allow_zero else gamma > 0
    if not (lower_ok and gamma < 1):
        bounds = "[0, 1)" if allow_zero else "(0, 1)"
        raise ParameterError(f"gamma must lie in {bounds}, got {gamma}")
    return gamma


# ═══════════════════════════════════════════════════════════════
#  CONTROL PARAMETERS
# ═══════════════════════════════════════════════════════════════

class ControlParams(BaseModel):
    """(s, gamma, alpha, k) shared by every critical-value recipe."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    s: int = Field(ge=1, description="number of hypotheses")
    gamma: Optional[Fraction] = Field(default=None, description="FDP tolerance, exact rational in (0,1)")
    alpha: float = Field(description="error level in (0,1)")
    k: int = Field(default=1, ge=1, description="k of the k-FWER")

    @field_validator("gamma", mode="before")
    @classmethod
    def _exact_gamma(cls, value):
        if value is None:
            return None
        return parse_gamma(value)

    @field_validator("alpha")
    @classmethod
    def _alpha_in_unit_interval(cls, value: float) -> float:
        if not (0.0 < value < 1.0):
            raise ParameterError(f"alpha must lie in (0, 1), got {value}")
        return float(value)

    @model_validator(mode="after")
    def _k_not_above_s(self) -> "ControlParams":
        if self.k > self.s:
            raise ParameterError(f"k = {self.k} exceeds s = {self.s}")
        return self

    @field_serializer("gamma")
    def _gamma_as_text(self, gamma: Optional[Fraction]) -> Optional[str]:
        return None if gamma is None else str(gamma)

    def require_gamma(self) -> Fraction:
        """The FDP recipes cannot run without gamma; say so clearly."""
        if self.gamma is None:
            raise ParameterError("this recipe needs gamma")
        return self.gamma


# ═══════════════════════════════════════════════════════════════
#  CRITICAL SEQUENCES
# ═══════════════════════════════════════════════════════════════

class Recipe(str, Enum):
    """Which construction produced a critical sequence."""

    HOLM = "holm"
    KFWER = "kfwer"
    FDP_BASE = "fdp-base"
    FDP_LR = "fdp-lr"
    FDP_IMPROVED = "fdp-improved"
    FDP_KNOWN_I = "fdp-known-i"
    RESCALED_CUSTOM = "rescaled-custom"
    ETA_I = "eta-i"
    ETA_II = "eta-ii"
    FDR_STEPDOWN = "fdr-stepdown"
    FDR_CONSERVATIVE = "fdr-conservative"
    BH_STEPUP = "bh-stepup"

    @property
    def needs_gamma(self) -> bool:
        return self in _GAMMA_RECIPES


_GAMMA_RECIPES = {
    Recipe.FDP_BASE, Recipe.FDP_LR, Recipe.FDP_IMPROVED, Recipe.FDP_KNOWN_I,
    Recipe.RESCALED_CUSTOM, Recipe.ETA_I, Recipe.ETA_II,
}


class CriticalSequence(BaseModel):
    """
    The nondecreasing thresholds alpha_1 <= ... <= alpha_s plus the recipe
    and parameters that produced them. Index 1 in the docs is values[0].
    """

    values: list[float]
    recipe: Recipe
    params: ControlParams
    d_used: Optional[float] = None        # divisor D, C or S actually applied
    delta_scale: Optional[float] = None   # set when custom deltas were rescaled into [0,1]

    @model_validator(mode="after")
    def _check_shape(self) -> "CriticalSequence":
        if len(self.values) != self.params.s:
            raise ParameterError(f"expected {self.params.s} constants, got {len(self.values)}")
        for position, value in enumerate(self.values, start=1):
            if not (0.0 <= value <= 1.0):
                raise ParameterError(f"constant {position} = {value} lies outside [0, 1]")
        for position in range(1, len(self.values)):
            if self.values[position] < self.values[position - 1]:
                raise ParameterError(f"constants decrease at step {position + 1}")
        return self

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_rows(self) -> list[tuple[int, float]]:
        """1-based (i, alpha_i) rows for CSV output."""
        return [(i, value) for i, value in enumerate(self.values, start=1)]


class DResult(BaseModel):
    """Maximum of S(gamma, s, |I|) over |I| and where it is attained."""

    d: float = Field(ge=0.0)
    argmax_I: int = Field(ge=1)
    per_I: Optional[list[tuple[int, int, float]]] = None   # (|I|, N, S)

    @model_validator(mode="after")
    def _argmax_attains_max(self) -> "DResult":
        if self.per_I:
            best = max(row[2] for row in self.per_I)
            if not math.isclose(best, self.d, rel_tol=1e-12, abs_tol=1e-15):
                raise ParameterError("d does not equal the largest listed S")
            attained = {row[0]: row[2] for row in self.per_I}
            if not math.isclose(attained.get(self.argmax_I, -1.0), self.d, rel_tol=1e-12, abs_tol=1e-15):
                raise ParameterError("argmax_I does not attain d")
        return self


class HeadroomReport(BaseModel):
    """
    How much room is left between 1/D and the largest constant multiple of
    the base FDP constants that could still control the FDP.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    s: int
    gamma: Fraction
    argmax_I: int
    n_cap: int
    d: float
    trigger_steps: int
    lower_bound: float
    headroom: float

    @field_serializer("gamma")
    def _gamma_as_text(self, gamma: Fraction) -> str:
        return str(gamma)


# ═══════════════════════════════════════════════════════════════
#  PER-TRIAL RECORDS
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True, eq=False)
class PValueSet:
    """p-values p_1..p_s with optional labels."""

    values: np.ndarray
    ids: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ParameterError("p-values must be a non-empty 1-d list")
        if not np.all((values >= 0.0) & (values <= 1.0)):
            raise ParameterError("every p-value must lie in [0, 1]")
        object.__setattr__(self, "values", values)
        if self.ids is not None:
            ids = tuple(str(label) for label in self.ids)
            if len(ids) != values.size:
                raise ParameterError("ids and p-values differ in length")
            object.__setattr__(self, "ids", ids)

    @property
    def s(self) -> int:
        return int(self.values.size)

    def label(self, index: int) -> str:
        """Label of the hypothesis at 0-based position `index` (1-based number when unlabelled)."""
        return self.ids[index] if self.ids is not None else str(index + 1)


@dataclass(frozen=True, eq=False)
class TruthMask:
    """Which hypotheses are true nulls; I is their count."""

    is_true_null: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.is_true_null, dtype=bool)
        if mask.ndim != 1:
            raise ParameterError("truth mask must be 1-d")
        object.__setattr__(self, "is_true_null", mask)

    @property
    def I(self) -> int:  # noqa: E743 - matches the |I| of the theory
        return int(np.count_nonzero(self.is_true_null))

    @property
    def s(self) -> int:
        return int(self.is_true_null.size)


@dataclass(frozen=True, eq=False)
class TraceStep:
    rank: int            # 1-based position in the ordered p-values
    index: int           # 0-based position in the input
    p_value: float
    threshold: float
    decision: str        # "reject" / "retain"


@dataclass(frozen=True, eq=False)
class RejectionOutcome:
    """
    Result of a stepdown or stepup pass. The trace is built on first access
    so the simulation loop never pays for it.
    """

    num_rejected: int
    rejected: frozenset
    mode: str
    order: np.ndarray = field(repr=False)          # input positions sorted by (p, position)
    sorted_values: np.ndarray = field(repr=False)
    thresholds: np.ndarray = field(repr=False)

    @cached_property
    def trace(self) -> list[TraceStep]:
        steps = []
        for rank, (index, p_value, threshold) in enumerate(
            zip(self.order, self.sorted_values, self.thresholds), start=1
        ):
            decision = "reject" if rank <= self.num_rejected else "retain"
            steps.append(TraceStep(rank, int(index), float(p_value), float(threshold), decision))
        return steps

    def rejected_mask(self, s: int) -> np.ndarray:
        mask = np.zeros(s, dtype=bool)
        mask[self.order[: self.num_rejected]] = True
        return mask


# ═══════════════════════════════════════════════════════════════
#  SIMULATION REPORT
# ═══════════════════════════════════════════════════════════════

class MetricEstimate(BaseModel):
    mean: float
    se: float


class SimulationReport(BaseModel):
    """Monte Carlo estimates plus an echo of everything that produced them."""

    schema_version: int = SCHEMA_VERSION
    trials: int = Field(ge=1)
    estimates: dict[str, MetricEstimate]
    scenario: dict
    recipe: str
    mode: str
    params: ControlParams
    seed: int

    def estimate(self, metric: str) -> MetricEstimate:
        if metric not in self.estimates:
            raise ParameterError(f"report has no metric {metric!r}; available: {sorted(self.estimates)}")
        return self.estimates[metric]

    def to_json_dict(self) -> dict:
        return self.model_dump(mode="json")
