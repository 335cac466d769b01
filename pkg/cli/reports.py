"""
reports.py — the reproduction tables and figure data sets.

  table 1   D(gamma, s) next to the harmonic divisor C_{floor(gamma*s)+1}
  table 2   D(gamma, s) for delta_i = i/s next to (1/gamma) max{C_floor(gamma*s), 1}
  figure 1  improved FDP constants vs the rescaled i/s constants (s=100, gamma=0.1, alpha=0.05)
  figure 2  FDP constants vs FDR stepdown constants tuned for FDP control
  figure 3  FDP constants tuned for FDR control vs FDR stepdown constants

Rows come back as dicts of raw floats; `write_csv` does the formatting.
"""

from __future__ import annotations

import csv
from fractions import Fraction
from typing import IO, Iterable, Sequence

import numpy as np

from core import constants
from core.errors import ParameterError
from core.state_schema import ControlParams

# ── grid of (gamma, s) rows, in printed order ────────────────
TABLE_GRID: dict[str, tuple[int, ...]] = {
    "0.01": (100, 250, 500, 1000, 2000, 5000),
    "0.05": (25, 50, 100, 250, 500, 1000, 2000, 5000),
    "0.1": (10, 25, 50, 100, 250, 500, 1000, 2000, 5000),
}
TABLE_COLUMNS = ("s", "gamma", "D", "C_or_bound", "ratio")
TABLE_FORMAT = ".5g"          # five significant figures, as the tables print
FIGURE_FORMAT = ".6g"

FIGURE_S = 100
FIGURE_ALPHA = 0.05
FIGURE_GAMMA = Fraction(1, 10)
FIGURE3_GAMMA = Fraction(1, 40)     # alpha / 2

FIGURE_COLUMNS = {
    1: ("i", "alpha_improved", "eta_prime", "ratio"),
    2: ("i", "alpha_fdp", "alpha_fdr_tuned_for_fdp", "ratio"),
    3: ("i", "alpha_fdp_tuned_for_fdr", "alpha_fdr", "ratio"),
}


def table_row(which: int, s: int, gamma: str) -> dict:
    """One (s, gamma) row of table 1 or 2."""
    params = ControlParams(s=s, gamma=gamma, alpha=0.05)   # alpha cancels out of D and C
    g = constants.floor_gamma_times(params.gamma, s)
    if which == 1:
        d = constants.d_value(params).d
        other = constants.harmonic(g + 1)
    elif which == 2:
        d = constants.d_value(params, np.arange(1, s + 1) / s).d
        other = max(constants.harmonic(g), 1.0) / float(params.gamma)
    else:
        raise ParameterError(f"table must be 1 or 2, got {which}")
    return {"s": s, "gamma": gamma, "D": d, "C_or_bound": other, "ratio": other / d}


def table_rows(which: int) -> list[dict]:
    return [table_row(which, s, gamma) for gamma, sizes in TABLE_GRID.items() for s in sizes]


def _pair_rows(columns: Sequence[str], left: Sequence[float], right: Sequence[float]) -> list[dict]:
    rows = []
    for i, (a, b) in enumerate(zip(left, right), start=1):
        rows.append({columns[0]: i, columns[1]: a, columns[2]: b, columns[3]: a / b})
    return rows


def figure_rows(which: int) -> list[dict]:
    """Constant sequences plotted against each other, with their step-wise ratio."""
    if which == 1:
        params = ControlParams(s=FIGURE_S, gamma=FIGURE_GAMMA, alpha=FIGURE_ALPHA)
        left = constants.fdp_improved_constants(params).values
        right = constants.eta_constants(params, "i").values
    elif which == 2:
        # FDR <= alpha*gamma implies P{FDP > gamma} <= alpha
        fdp_params = ControlParams(s=FIGURE_S, gamma=FIGURE_GAMMA, alpha=FIGURE_ALPHA)
        fdr_level = FIGURE_ALPHA * float(FIGURE_GAMMA)
        left = constants.fdp_base_constants(fdp_params).values
        right = constants.fdr_stepdown_constants(ControlParams(s=FIGURE_S, alpha=fdr_level)).values
    elif which == 3:
        # P{FDP > alpha/2} <= alpha/(2 - alpha) implies FDR <= alpha
        tuned = ControlParams(s=FIGURE_S, gamma=FIGURE3_GAMMA, alpha=FIGURE_ALPHA / (2.0 - FIGURE_ALPHA))
        left = constants.fdp_base_constants(tuned).values
        right = constants.fdr_stepdown_constants(ControlParams(s=FIGURE_S, alpha=FIGURE_ALPHA)).values
    else:
        raise ParameterError(f"figure must be 1, 2 or 3, got {which}")
    return _pair_rows(FIGURE_COLUMNS[which], left, right)


def write_csv(rows: Iterable[dict], columns: Sequence[str], stream: IO[str], float_format: str = FIGURE_FORMAT) -> None:
    """Plain comma-separated output; floats with a fixed format spec, never locale-aware."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format(row[c], float_format) if isinstance(row[c], float) else row[c] for c in columns])
