"""
=============================================================
database/results_store.py — Stepdown FDP Toolkit
=============================================================
PURPOSE:
  Keeps a history of simulation reports in a small SQLite file
  (outputs/results.db unless STEPDOWN_DB says otherwise).

  2 tables:
    1. simulation_runs   — one row per saved report, full JSON kept
    2. metric_estimates  — one row per (run, metric) for quick queries

HOW TO USE:
  from database.results_store import save_report, list_runs
  run_id = save_report(report)
  for row in list_runs():
      print(row)
=============================================================
"""

from __future__ import annotations

import json
import logging
import os
import sqlite3
from typing import Optional

from core.state_schema import SimulationReport

logger = logging.getLogger(__name__)

# ── Where the database file lives ─────────────────────────────
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_DB_PATH = os.path.join(PROJECT_ROOT, "outputs", "results.db")

_SCHEMA = """
    CREATE TABLE IF NOT EXISTS simulation_runs (
        run_id        INTEGER PRIMARY KEY AUTOINCREMENT,
        created_at    TEXT DEFAULT CURRENT_TIMESTAMP,
        scenario      TEXT NOT NULL,          -- scenario tag, e.g. example31
        recipe        TEXT NOT NULL,          -- constants recipe tag
        mode          TEXT NOT NULL,          -- stepdown / stepup
        s             INTEGER NOT NULL,
        gamma         TEXT,                   -- exact rational as text, NULL when unused
        alpha         REAL NOT NULL,
        k             INTEGER NOT NULL,
        trials        INTEGER NOT NULL,
        seed          INTEGER NOT NULL,
        report_json   TEXT NOT NULL           -- the whole SimulationReport
    );
    CREATE TABLE IF NOT EXISTS metric_estimates (
        run_id        INTEGER NOT NULL REFERENCES simulation_runs(run_id),
        metric        TEXT NOT NULL,
        mean          REAL NOT NULL,
        se            REAL NOT NULL,
        PRIMARY KEY (run_id, metric)
    );
"""


def resolve_db_path(db_path: Optional[str] = None) -> str:
    """Explicit path, else STEPDOWN_DB, else outputs/results.db."""
    return db_path or os.environ.get("STEPDOWN_DB") or DEFAULT_DB_PATH


def _get_connection(db_path: Optional[str] = None) -> sqlite3.Connection:
    """Opens the store (creating folder and tables on first use) with row["column"] access."""
    path = resolve_db_path(db_path)
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    conn = sqlite3.connect(path)
    conn.row_factory = sqlite3.Row
    conn.executescript(_SCHEMA)
    return conn


def _run_query(sql_query: str, params: tuple = (), db_path: Optional[str] = None) -> list[dict]:
    """Runs one SELECT and returns plain dicts."""
    conn = _get_connection(db_path)
    try:
        rows = conn.execute(sql_query, params).fetchall()
    finally:
        conn.close()
    return [dict(row) for row in rows]


# =============================================================
# WRITE
# =============================================================

def save_report(report: SimulationReport, db_path: Optional[str] = None) -> int:
    """Stores one report; returns its run id."""
    payload = report.to_json_dict()
    params = payload["params"]
    conn = _get_connection(db_path)
    try:
        with conn:                                     # commits, or rolls back on error
            cursor = conn.execute(
                """
                INSERT INTO simulation_runs
                    (scenario, recipe, mode, s, gamma, alpha, k, trials, seed, report_json)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    payload["scenario"]["name"], report.recipe, report.mode,
                    params["s"], params["gamma"], params["alpha"], params["k"],
                    report.trials, report.seed, json.dumps(payload),
                ),
            )
            run_id = int(cursor.lastrowid)
            conn.executemany(
                "INSERT INTO metric_estimates (run_id, metric, mean, se) VALUES (?, ?, ?, ?)",
                [(run_id, name, value.mean, value.se) for name, value in report.estimates.items()],
            )
    finally:
        conn.close()
    logger.info("💾 saved run %d to %s", run_id, resolve_db_path(db_path))
    return run_id


# =============================================================
# READ
# =============================================================

def list_runs(limit: int = 20, db_path: Optional[str] = None) -> list[dict]:
    """Most recent runs first, without the JSON payload."""
    sql = """
        SELECT run_id, created_at, scenario, recipe, mode, s, gamma, alpha, k, trials, seed
        FROM simulation_runs
        ORDER BY run_id DESC
        LIMIT ?
    """
    return _run_query(sql, (int(limit),), db_path)


def fetch_report(run_id: int, db_path: Optional[str] = None) -> Optional[SimulationReport]:
    """The stored report, or None for an unknown id."""
    rows = _run_query("SELECT report_json FROM simulation_runs WHERE run_id = ?", (int(run_id),), db_path)
    if not rows:
        return None
    return SimulationReport.model_validate(json.loads(rows[0]["report_json"]))


def metric_history(metric: str, scenario: Optional[str] = None, db_path: Optional[str] = None) -> list[dict]:
    """Every stored estimate of one metric, oldest first, optionally for one scenario."""
    sql = """
        SELECT r.run_id, r.created_at, r.scenario, r.recipe, r.mode, r.s, r.gamma, r.alpha,
               r.trials, m.mean, m.se
        FROM metric_estimates AS m
        JOIN simulation_runs AS r ON r.run_id = m.run_id
        WHERE m.metric = ? AND (? IS NULL OR r.scenario = ?)
        ORDER BY r.run_id ASC
    """
    return _run_query(sql, (metric, scenario, scenario), db_path)
