"""
=============================================================
cli/main.py — Stepdown FDP Toolkit
=============================================================
PURPOSE:
  Command-line front end. Machine-readable output (CSV / JSON)
  goes to standard output or --out FILE; status lines and
  errors go to standard error.

  constants   print a critical-value sequence        (CSV)
  apply       run stepdown / stepup on a p-value file (JSON)
  table       reproduce table 1 or 2                 (CSV)
  figure      data behind figure 1, 2 or 3           (CSV)
  simulate    Monte Carlo error rates                (JSON)
  headroom    how far 1/D is from the best multiple  (JSON)
  reproduce   everything above into one folder       (JSON summary)
  history     stored simulation runs                 (JSON)

  Exit codes: 0 done, 2 bad input, 1 anything else.
=============================================================
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from typing import Callable, Optional

from cli import reports
from cli.config import RunConfig, build_run_config, read_numbers, read_pvalues
from core.constants import build_constants, headroom_analysis
from core.errors import ParameterError
from core.procedures import MODES, apply
from core.state_schema import SCHEMA_VERSION, ControlParams, CriticalSequence, Recipe
from database import results_store
from scenarios.samplers import ScenarioName, build_scenario
from workflow import simulation

logger = logging.getLogger("stepdown")

# scenarios whose size is fixed by the construction (remark31: default size)
FIXED_SIZES = {"example31": 100, "example41": 3, "remark31": 1000}


def configure_logging(verbosity: int = 0) -> None:
    """Status lines on stderr; -v for debug detail, -q for warnings only."""
    level = logging.DEBUG if verbosity > 0 else logging.WARNING if verbosity < 0 else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format="%(message)s", force=True)


# =============================================================
# SHARED HELPERS
# =============================================================

def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        logger.info("✅ wrote %s", cfg.out)
    else:
        sys.stdout.write(text)


def _emit_json(cfg: RunConfig, payload) -> None:
    _emit(cfg, json.dumps(payload, indent=2) + "\n")


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(cfg, name) is None]
    if missing:
        raise ParameterError(f"{cfg.command} needs {', '.join(missing)}")


def _control_params(cfg: RunConfig, s: Optional[int] = None) -> ControlParams:
    size = s if s is not None else cfg.s
    if size is None:
        raise ParameterError(f"{cfg.command} needs --s")
    _require(cfg, "alpha")
    return ControlParams(s=size, gamma=cfg.gamma, alpha=cfg.alpha, k=cfg.k)


def _constants(cfg: RunConfig, params: ControlParams) -> CriticalSequence:
    _require(cfg, "method")
    deltas = read_numbers(cfg.deltas, "deltas") if cfg.deltas else None
    return build_constants(cfg.method, params, deltas, conservative=cfg.conservative, known_I=cfg.known_i)


# =============================================================
# COMMANDS
# =============================================================

def cmd_constants(cfg: RunConfig) -> None:
    sequence = _constants(cfg, _control_params(cfg))
    rows = [{"i": i, "alpha_i": value} for i, value in sequence.to_rows()]
    buffer = io.StringIO()
    reports.write_csv(rows, ("i", "alpha_i"), buffer)
    _emit(cfg, buffer.getvalue())
    if sequence.d_used is not None:
        logger.info("divisor applied: %.6g", sequence.d_used)
    if sequence.delta_scale is not None:
        logger.info("deltas divided by their maximum %.6g", sequence.delta_scale)


def cmd_apply(cfg: RunConfig) -> None:
    _require(cfg, "pvalues")
    p_values = read_pvalues(cfg.pvalues)
    if cfg.s is not None and cfg.s != p_values.s:
        raise ParameterError(f"--s {cfg.s} but the file holds {p_values.s} p-values")
    sequence = _constants(cfg, _control_params(cfg, p_values.s))
    outcome = apply(p_values, sequence, cfg.mode)
    _emit_json(cfg, {
        "schema_version": SCHEMA_VERSION,
        "mode": outcome.mode,
        "recipe": sequence.recipe.value,
        "num_rejected": outcome.num_rejected,
        "rejected_ids": [p_values.label(int(index)) for index in outcome.order[: outcome.num_rejected]],
        "thresholds": sequence.values,
        "trace": [
            {
                "rank": step.rank,
                "id": p_values.label(step.index),
                "p_value": step.p_value,
                "threshold": step.threshold,
                "decision": step.decision,
            }
            for step in outcome.trace
        ],
    })
    logger.info("✅ %d of %d hypotheses rejected (%s)", outcome.num_rejected, p_values.s, outcome.mode)


def cmd_table(cfg: RunConfig) -> None:
    buffer = io.StringIO()
    reports.write_csv(reports.table_rows(cfg.which), reports.TABLE_COLUMNS, buffer, reports.TABLE_FORMAT)
    _emit(cfg, buffer.getvalue())


def cmd_figure(cfg: RunConfig) -> None:
    buffer = io.StringIO()
    reports.write_csv(reports.figure_rows(cfg.which), reports.FIGURE_COLUMNS[cfg.which], buffer)
    _emit(cfg, buffer.getvalue())


def cmd_simulate(cfg: RunConfig) -> None:
    _require(cfg, "scenario", "method")
    try:
        name = ScenarioName(cfg.scenario)
    except ValueError as name_error:
        raise ParameterError(f"unknown scenario {cfg.scenario!r}") from name_error
    size = cfg.s if cfg.s is not None else FIXED_SIZES.get(name.value)
    params = _control_params(cfg, size)

    overrides: dict = {}
    if name is ScenarioName.INDEPENDENT:
        overrides["alt_law"] = cfg.alt_law
    elif name is ScenarioName.EQUICORRELATED:
        overrides.update(rho=cfg.rho, shift=cfg.shift, couple_false=cfg.couple_false)
    elif name is ScenarioName.LEMMA31 and cfg.betas:
        overrides["betas"] = read_numbers(cfg.betas, "betas")
    scenario = build_scenario(name, params, I=cfg.I, seed=cfg.seed, **overrides)

    deltas = read_numbers(cfg.deltas, "deltas") if cfg.deltas else None
    sequence = build_constants(cfg.method, params, deltas, conservative=cfg.conservative, known_I=cfg.known_i)
    report = simulation.run(
        scenario, sequence.recipe, cfg.mode, params, cfg.trials, cfg.seed,
        workers=cfg.workers, constants=sequence,
    )
    if cfg.save:
        run_id = results_store.save_report(report, cfg.db)
        logger.info("💾 stored as run %d", run_id)
    _emit_json(cfg, report.to_json_dict())


def cmd_headroom(cfg: RunConfig) -> None:
    _require(cfg, "s", "gamma")
    params = ControlParams(s=cfg.s, gamma=cfg.gamma, alpha=cfg.alpha if cfg.alpha is not None else 0.05)
    report = headroom_analysis(params)
    _emit_json(cfg, {"schema_version": SCHEMA_VERSION, **report.model_dump(mode="json")})


def cmd_reproduce(cfg: RunConfig) -> None:
    from workflow.reproduce_graph import run_reproduction   # builds the graph on import

    state = run_reproduction(cfg.out_dir, trials=cfg.trials, seed=cfg.seed, workers=cfg.workers)
    _emit_json(cfg, {"schema_version": SCHEMA_VERSION, **state["summary"]})


def cmd_history(cfg: RunConfig) -> None:
    if cfg.metric:
        rows = results_store.metric_history(cfg.metric, cfg.scenario, cfg.db)
    else:
        rows = results_store.list_runs(cfg.limit, cfg.db)
    _emit_json(cfg, rows)


COMMANDS: dict[str, Callable[[RunConfig], None]] = {
    "constants": cmd_constants,
    "apply": cmd_apply,
    "table": cmd_table,
    "figure": cmd_figure,
    "simulate": cmd_simulate,
    "headroom": cmd_headroom,
    "reproduce": cmd_reproduce,
    "history": cmd_history,
}


# =============================================================
# ARGUMENT PARSER: every default is None so --config can fill it
# =============================================================

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value settings file")
    parser.add_argument("--out", help="write output here instead of standard output")


def _add_method(parser: argparse.ArgumentParser) -> None:
    tags = ", ".join(recipe.value for recipe in Recipe)
    parser.add_argument("--method", help=f"recipe tag: {tags} (aliases fdr-sd, bh)")
    parser.add_argument("--s", type=int, help="number of hypotheses")
    parser.add_argument("--gamma", help="FDP tolerance as a decimal string, e.g. 0.1")
    parser.add_argument("--alpha", type=float, help="error level in (0, 1)")
    parser.add_argument("--k", type=int, help="k of the k-FWER (default 1)")
    parser.add_argument("--deltas", help="file of custom deltas (rescaled-custom)")
    parser.add_argument("--known-i", dest="known_i", type=int, help="number of true nulls (fdp-known-i)")
    parser.add_argument("--conservative", action="store_true", default=None,
                        help="FDR constants never above alpha")
    parser.add_argument("--mode", choices=MODES, help="stepdown (default) or stepup")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stepdown", description="Stepdown FDP Toolkit")
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("-v", "--verbose", action="store_true", help="debug detail on stderr")
    noise.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    constants_cmd = sub.add_parser("constants", help="print a critical-value sequence")
    _add_method(constants_cmd)
    _add_common(constants_cmd)

    apply_cmd = sub.add_parser("apply", help="apply a procedure to a p-value file")
    apply_cmd.add_argument("--pvalues", help="CSV with columns id,p or p")
    _add_method(apply_cmd)
    _add_common(apply_cmd)

    table_cmd = sub.add_parser("table", help="reproduce table 1 or 2")
    table_cmd.add_argument("which", type=int, choices=(1, 2))
    _add_common(table_cmd)

    figure_cmd = sub.add_parser("figure", help="data behind figure 1, 2 or 3")
    figure_cmd.add_argument("which", type=int, choices=(1, 2, 3))
    _add_common(figure_cmd)

    simulate_cmd = sub.add_parser("simulate", help="Monte Carlo error rates")
    simulate_cmd.add_argument("--scenario", help=", ".join(member.value for member in ScenarioName))
    simulate_cmd.add_argument("--I", dest="I", type=int, help="number of true nulls")
    simulate_cmd.add_argument("--alt-law", dest="alt_law", help="point:<eps> or power:<a>")
    simulate_cmd.add_argument("--rho", type=float, help="equicorrelation in [0, 1)")
    simulate_cmd.add_argument("--shift", type=float, help="mean shift of false nulls")
    simulate_cmd.add_argument("--independent-false", dest="couple_false", action="store_false", default=None,
                              help="false nulls get their own common factor")
    simulate_cmd.add_argument("--betas", help="file of betas for the lemma31 scenario")
    simulate_cmd.add_argument("--trials", type=int, help="number of trials (env STEPDOWN_TRIALS)")
    simulate_cmd.add_argument("--seed", type=int, help="master seed")
    simulate_cmd.add_argument("--workers", type=int, help="worker processes (env STEPDOWN_WORKERS)")
    simulate_cmd.add_argument("--save", action="store_true", default=None, help="store the report")
    simulate_cmd.add_argument("--db", help="results database (env STEPDOWN_DB)")
    _add_method(simulate_cmd)
    _add_common(simulate_cmd)

    headroom_cmd = sub.add_parser("headroom", help="gap between 1/D and the best constant multiple")
    headroom_cmd.add_argument("--s", type=int)
    headroom_cmd.add_argument("--gamma")
    headroom_cmd.add_argument("--alpha", type=float)
    _add_common(headroom_cmd)

    reproduce_cmd = sub.add_parser("reproduce", help="write every table, figure and check into a folder")
    reproduce_cmd.add_argument("--out-dir", dest="out_dir", help="target folder (default outputs/reproduction)")
    reproduce_cmd.add_argument("--trials", type=int)
    reproduce_cmd.add_argument("--seed", type=int)
    reproduce_cmd.add_argument("--workers", type=int)
    _add_common(reproduce_cmd)

    history_cmd = sub.add_parser("history", help="stored simulation runs")
    history_cmd.add_argument("--limit", type=int)
    history_cmd.add_argument("--metric", help="list one metric across runs")
    history_cmd.add_argument("--scenario")
    history_cmd.add_argument("--db")
    _add_common(history_cmd)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(1 if args.verbose else -1 if args.quiet else 0)

    flags = {key: value for key, value in vars(args).items() if key not in ("command", "verbose", "quiet")}
    try:
        cfg = build_run_config(args.command, flags)
        COMMANDS[args.command](cfg)
    except ValueError as error:
        sys.stderr.write(f"error: {error}\n")
        return 2
    except Exception as error:
        logger.debug("unexpected failure", exc_info=True)
        sys.stderr.write(f"error: {type(error).__name__}: {error}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
