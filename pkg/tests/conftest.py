"""Shared fixtures and helpers for the pytest suite."""

import math
import os
import sys
from decimal import Decimal

import pytest

# ── make `core`, `scenarios`, ... importable without installing ──
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from core.state_schema import ControlParams  # noqa: E402


def printed_close(value: float, printed: str) -> bool:
    """
    True when `value` matches a number printed to five significant figures,
    allowing one unit in the last printed place.
    """
    target = Decimal(printed)
    exponent = math.floor(math.log10(abs(float(target)))) if float(target) != 0 else 0
    unit = 10.0 ** (exponent - 4)
    return abs(value - float(target)) <= unit


@pytest.fixture
def params_100():
    """s = 100, gamma = 0.1, alpha = 0.05."""
    return ControlParams(s=100, gamma="0.1", alpha=0.05)


@pytest.fixture
def tmp_db(tmp_path):
    return str(tmp_path / "results.db")


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("STEPDOWN_TRIALS", "STEPDOWN_WORKERS", "STEPDOWN_DB"):
        monkeypatch.delenv(name, raising=False)
