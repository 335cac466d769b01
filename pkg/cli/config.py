"""
=============================================================
cli/config.py — Stepdown FDP Toolkit
=============================================================
PURPOSE:
  Turns flags, an optional config file and environment variables
  into one validated RunConfig, and reads the input files.

  Precedence (highest first):
    1. command-line flags
    2. --config FILE      (key = value lines, # comments)
    3. environment        STEPDOWN_TRIALS, STEPDOWN_WORKERS, STEPDOWN_DB
    4. built-in defaults

  Input files:
    p-values  CSV, optional header, columns `id,p` or just `p`
    deltas    numbers separated by commas and/or newlines
=============================================================
"""

from __future__ import annotations

import csv
import logging
import os
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.errors import ParameterError
from core.state_schema import PValueSet, parse_gamma
from workflow.simulation import DEFAULT_TRIALS

logger = logging.getLogger(__name__)

METHOD_ALIASES = {"fdr-sd": "fdr-stepdown", "bh": "bh-stepup"}


class InputFileError(ParameterError):
    """A user-supplied file could not be read; carries the path and 1-based line."""

    def __init__(self, path: str, line: Optional[int], message: str):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")


# =============================================================
# RunConfig: every key a flag or config file may set
# =============================================================

class RunConfig(BaseModel):
    """Merged settings for one command. Unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    command: str
    # constants
    method: Optional[str] = None
    s: Optional[int] = Field(default=None, ge=1)
    gamma: Optional[str] = None
    alpha: Optional[float] = None
    k: int = Field(default=1, ge=1)
    deltas: Optional[str] = None
    known_i: Optional[int] = Field(default=None, ge=1)
    conservative: bool = False
    # apply
    pvalues: Optional[str] = None
    mode: str = "stepdown"
    # table / figure
    which: Optional[int] = None
    # simulate
    scenario: Optional[str] = None
    I: Optional[int] = Field(default=None, ge=0)
    alt_law: str = "point:0"
    rho: float = 0.5
    shift: float = 3.0
    couple_false: bool = True
    betas: Optional[str] = None
    trials: int = Field(default=DEFAULT_TRIALS, ge=1)
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    save: bool = False
    # reproduce / history
    out_dir: str = "outputs/reproduction"
    db: Optional[str] = None
    limit: int = Field(default=20, ge=1)
    metric: Optional[str] = None
    # shared
    out: Optional[str] = None
    config: Optional[str] = None

    @field_validator("method")
    @classmethod
    def _canonical_method(cls, value: Optional[str]) -> Optional[str]:
        if value is None:
            return None
        value = value.strip().lower()
        return METHOD_ALIASES.get(value, value)

    @field_validator("gamma", mode="before")
    @classmethod
    def _gamma_text(cls, value) -> Optional[str]:
        if value is None:
            return None
        if not isinstance(value, str):
            raise ParameterError("gamma must be given as a decimal string such as 0.1")
        parse_gamma(value)                      # validate early, keep the text
        return value.strip()


# =============================================================
# CONFIG FILE AND ENVIRONMENT
# =============================================================

def read_config_file(path: str) -> dict[str, str]:
    """`key = value` lines; dashes in keys become underscores."""
    known = set(RunConfig.model_fields)
    settings: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as open_error:
        raise InputFileError(path, None, f"cannot open config file ({open_error.strerror})") from open_error

    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputFileError(path, number, f"expected 'key = value', got {raw.strip()!r}")
        key = key.strip().replace("-", "_")
        if key not in known or key in ("command", "config"):
            raise InputFileError(path, number, f"unknown key {key!r}")
        settings[key] = value.strip()
    return settings


def environment_defaults() -> dict[str, str]:
    """Settings taken from STEPDOWN_* variables when set."""
    mapping = {"STEPDOWN_TRIALS": "trials", "STEPDOWN_WORKERS": "workers", "STEPDOWN_DB": "db"}
    return {key: os.environ[name] for name, key in mapping.items() if os.environ.get(name, "").strip()}


def build_run_config(command: str, flags: dict[str, Any]) -> RunConfig:
    """Merge environment < config file < flags and validate the result."""
    given = {key: value for key, value in flags.items() if value is not None}
    merged: dict[str, Any] = dict(environment_defaults())
    config_path = given.get("config")
    if config_path:
        merged.update(read_config_file(config_path))
        logger.debug("read %d settings from %s", len(merged), config_path)
    merged.update(given)
    merged["command"] = command
    return RunConfig(**merged)


# =============================================================
# INPUT FILES
# =============================================================

def _parse_probability(path: str, number: int, text: str) -> float:
    try:
        value = float(text)
    except ValueError as number_error:
        raise InputFileError(path, number, f"{text!r} is not a number") from number_error
    if not (0.0 <= value <= 1.0):
        raise InputFileError(path, number, f"p-value {value} lies outside [0, 1]")
    return value


def read_pvalues(path: str) -> PValueSet:
    """CSV with optional header; one column (p) or two (id, p)."""
    ids: list[str] = []
    values: list[float] = []
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as open_error:
        raise InputFileError(path, None, f"cannot open p-value file ({open_error.strerror})") from open_error

    for number, row in enumerate(rows, start=1):
        cells = [cell.strip() for cell in row]
        if not any(cells):
            continue
        if len(cells) not in (1, 2):
            raise InputFileError(path, number, f"expected 1 or 2 columns, got {len(cells)}")
        if not values and number == _first_content_line(rows) and _is_header(cells):
            continue
        if len(cells) == 2:
            ids.append(cells[0])
        values.append(_parse_probability(path, number, cells[-1]))

    if not values:
        raise InputFileError(path, None, "no p-values found")
    if ids and len(ids) != len(values):
        raise InputFileError(path, None, "mix of one- and two-column rows")
    return PValueSet(values, tuple(ids) if ids else None)


def _first_content_line(rows: list[list[str]]) -> int:
    for number, row in enumerate(rows, start=1):
        if any(cell.strip() for cell in row):
            return number
    return 0


def _is_header(cells: list[str]) -> bool:
    try:
        float(cells[-1])
    except ValueError:
        return True
    return False


def read_numbers(path: str, what: str = "deltas") -> list[float]:
    """Numbers separated by commas and/or newlines (deltas or betas files)."""
    numbers: list[float] = []
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as open_error:
        raise InputFileError(path, None, f"cannot open {what} file ({open_error.strerror})") from open_error

    for number, raw in enumerate(lines, start=1):
        for piece in raw.split("#", 1)[0].split(","):
            piece = piece.strip()
            if not piece:
                continue
            try:
                numbers.append(float(piece))
            except ValueError as number_error:
                raise InputFileError(path, number, f"{piece!r} is not a number") from number_error
    if not numbers:
        raise InputFileError(path, None, f"no {what} found")
    return numbers
