"""
=============================================================
workflow/reproduce_graph.py — Stepdown FDP Toolkit
=============================================================
PURPOSE:
  One-shot reproduction of every numeric result into a folder.

  1. Defines ReproduceState — the shared notepad (TypedDict)
     every step reads from and writes to.

  2. Builds a LangGraph StateGraph that runs the steps in order:
       tables → figures → headroom → violations → summary

  Files written into out_dir:
    table1.csv  table2.csv  figure1.csv  figure2.csv  figure3.csv
    headroom.json  violations.json  summary.json

  A step that fails records its error in error_log and the
  remaining steps still run. Without LangGraph installed the
  same node functions run one after another.

HOW TO USE:
  from workflow.reproduce_graph import run_reproduction
  state = run_reproduction("outputs/reproduction", trials=200_000, seed=7)
=============================================================
"""

from __future__ import annotations

import json
import logging
import os
from fractions import Fraction
from typing import TypedDict

from cli import reports
from core.constants import headroom_analysis
from core.state_schema import SCHEMA_VERSION, ControlParams, Recipe
from scenarios.samplers import build_scenario, union_bound
from workflow import simulation

logger = logging.getLogger(__name__)

# ── LangGraph is optional; the direct pipeline below covers its absence
try:
    from langgraph.graph import END, StateGraph
    LANGGRAPH_AVAILABLE = True
except ImportError:
    LANGGRAPH_AVAILABLE = False

TOTAL_STEPS = 5

HEADROOM_S = 1000
HEADROOM_GAMMA = Fraction(1, 10)

EXAMPLE31_ALPHA = 0.05
EXAMPLE41_ALPHA = 0.12


class ReproduceState(TypedDict):
    out_dir: str
    trials: int
    seed: int
    workers: int
    tables: dict          # "1" / "2" → number of rows written
    figures: dict         # "1" / "2" / "3" → ratio summary
    headroom: dict        # HeadroomReport as JSON
    violations: dict      # example31 / example41 → estimate, bound, verdict
    files: list           # every file written, in order
    summary: dict
    error_log: list


def _path(state: ReproduceState, name: str) -> str:
    path = os.path.join(state["out_dir"], name)
    state["files"].append(path)
    return path


def _write_json(state: ReproduceState, name: str, payload: dict) -> None:
    with open(_path(state, name), "w", encoding="utf-8") as handle:
        json.dump({"schema_version": SCHEMA_VERSION, **payload}, handle, indent=2)
        handle.write("\n")


# =============================================================
# NODE FUNCTIONS: each catches its own failure
# =============================================================

def node_tables(state: ReproduceState) -> ReproduceState:
    logger.info("[1/%d] 📊 tables — D(gamma, s) against both divisors", TOTAL_STEPS)
    try:
        for which in (1, 2):
            rows = reports.table_rows(which)
            with open(_path(state, f"table{which}.csv"), "w", encoding="utf-8", newline="") as handle:
                reports.write_csv(rows, reports.TABLE_COLUMNS, handle, reports.TABLE_FORMAT)
            state["tables"][str(which)] = len(rows)
        logger.info("[1/%d] ✅ tables written", TOTAL_STEPS)
    except Exception as error:
        state["error_log"].append(f"tables failed: {error}")
        logger.warning("[1/%d] ⚠️ tables error: %s", TOTAL_STEPS, error)
    return state


def node_figures(state: ReproduceState) -> ReproduceState:
    logger.info("[2/%d] 📈 figures — constant sequences and ratios", TOTAL_STEPS)
    try:
        for which in (1, 2, 3):
            rows = reports.figure_rows(which)
            with open(_path(state, f"figure{which}.csv"), "w", encoding="utf-8", newline="") as handle:
                reports.write_csv(rows, reports.FIGURE_COLUMNS[which], handle)
            below = [row["i"] for row in rows if row["ratio"] < 1.0]
            state["figures"][str(which)] = {"steps": len(rows), "ratio_below_one": below}
        logger.info("[2/%d] ✅ figures written", TOTAL_STEPS)
    except Exception as error:
        state["error_log"].append(f"figures failed: {error}")
        logger.warning("[2/%d] ⚠️ figures error: %s", TOTAL_STEPS, error)
    return state


def node_headroom(state: ReproduceState) -> ReproduceState:
    logger.info("[3/%d] 🔍 headroom — s=%d, gamma=%s", TOTAL_STEPS, HEADROOM_S, HEADROOM_GAMMA)
    try:
        report = headroom_analysis(ControlParams(s=HEADROOM_S, gamma=HEADROOM_GAMMA, alpha=EXAMPLE31_ALPHA))
        state["headroom"] = report.model_dump(mode="json")
        _write_json(state, "headroom.json", state["headroom"])
        logger.info("[3/%d] ✅ headroom %.4f at |I| = %d", TOTAL_STEPS, report.headroom, report.argmax_I)
    except Exception as error:
        state["error_log"].append(f"headroom failed: {error}")
        logger.warning("[3/%d] ⚠️ headroom error: %s", TOTAL_STEPS, error)
    return state


def _violation(state: ReproduceState, scenario_name: str, recipe: Recipe, params: ControlParams,
               metric: str, bound: float) -> dict:
    scenario = build_scenario(scenario_name, params)
    report = simulation.run(scenario, recipe, "stepdown", params, state["trials"], state["seed"], state["workers"])
    estimate = report.estimate(metric)
    return {
        "metric": metric,
        "estimate": estimate.mean,
        "se": estimate.se,
        "bound": bound,
        "level": params.alpha,
        "violation_detected": simulation.violation_check(report, metric, bound),
    }


def node_violations(state: ReproduceState) -> ReproduceState:
    logger.info("[4/%d] 🎲 violations — %d trials per construction", TOTAL_STEPS, state["trials"])
    try:
        fdp_params = ControlParams(s=100, gamma=Fraction(1, 10), alpha=EXAMPLE31_ALPHA)
        exact = union_bound(90, (EXAMPLE31_ALPHA / 92, 2 * EXAMPLE31_ALPHA / 91))
        state["violations"]["example31"] = _violation(
            state, "example31", Recipe.FDP_BASE, fdp_params, simulation.P_FDP_EXCEEDS, exact)

        fdr_params = ControlParams(s=3, alpha=EXAMPLE41_ALPHA)
        state["violations"]["example41"] = _violation(
            state, "example41", Recipe.FDR_STEPDOWN, fdr_params, simulation.FDR, 13 * EXAMPLE41_ALPHA / 12)

        _write_json(state, "violations.json", state["violations"])
        logger.info("[4/%d] ✅ violations simulated", TOTAL_STEPS)
    except Exception as error:
        state["error_log"].append(f"violations failed: {error}")
        logger.warning("[4/%d] ⚠️ violations error: %s", TOTAL_STEPS, error)
    return state


def node_summary(state: ReproduceState) -> ReproduceState:
    logger.info("[5/%d] 🧾 summary", TOTAL_STEPS)
    state["summary"] = {
        "trials": state["trials"],
        "seed": state["seed"],
        "tables": state["tables"],
        "figures": state["figures"],
        "headroom": state["headroom"].get("headroom"),
        "violations": {name: entry["violation_detected"] for name, entry in state["violations"].items()},
        "files": list(state["files"]) + [os.path.join(state["out_dir"], "summary.json")],
        "errors": list(state["error_log"]),
    }
    try:
        _write_json(state, "summary.json", state["summary"])
    except Exception as error:
        state["error_log"].append(f"summary failed: {error}")
        logger.warning("[5/%d] ⚠️ summary error: %s", TOTAL_STEPS, error)
    return state


# =============================================================
# GRAPH
# =============================================================

_NODES = (
    ("tables", node_tables),
    ("figures", node_figures),
    ("headroom", node_headroom),
    ("violations", node_violations),
    ("summary", node_summary),
)


def _build_langgraph():
    """Compiled StateGraph, or None when LangGraph is missing or refuses the graph."""
    if not LANGGRAPH_AVAILABLE:
        return None
    try:
        graph = StateGraph(ReproduceState)
        for name, node in _NODES:
            graph.add_node(name, node)
        graph.set_entry_point(_NODES[0][0])
        for (name, _), (following, _) in zip(_NODES, _NODES[1:]):
            graph.add_edge(name, following)
        graph.add_edge(_NODES[-1][0], END)
        return graph.compile()
    except Exception as graph_error:
        logger.warning("⚠️ LangGraph build failed, using the direct pipeline: %s", graph_error)
        return None


_compiled_graph = _build_langgraph()


def run_reproduction(
    out_dir: str,
    trials: int = simulation.DEFAULT_TRIALS,
    seed: int = 0,
    workers: int = 1,
    use_graph: bool = True,
) -> ReproduceState:
    """Write every table, figure, headroom and violation result into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    initial_state: ReproduceState = {
        "out_dir": out_dir,
        "trials": trials,
        "seed": seed,
        "workers": workers,
        "tables": {},
        "figures": {},
        "headroom": {},
        "violations": {},
        "files": [],
        "summary": {},
        "error_log": [],
    }

    if use_graph and _compiled_graph is not None:
        logger.info("🔗 running via LangGraph StateGraph")
        final_state = _compiled_graph.invoke(initial_state)
    else:
        logger.info("🔗 running via direct pipeline")
        final_state = initial_state
        for _, node in _NODES:
            final_state = node(final_state)

    errors = len(final_state["error_log"])
    if errors:
        logger.warning("⚠️ reproduction finished with %d error(s)", errors)
    else:
        logger.info("✅ reproduction complete: %d files in %s", len(final_state["summary"]["files"]), out_dir)
    return final_state
