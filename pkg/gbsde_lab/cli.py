# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

"""
Command line front end.

    gbsde-lab solve --config problem.json [--refine] [--out DIR] [--format csv|json]
    gbsde-lab dynkin --config game.json
    gbsde-lab option --config market.json
    gbsde-lab verify comparison|transform|ladder|saddle|solver [--seed S] [--batch B]

Without --out the summary is printed as JSON on stdout; with --out the per-node tables
and summary.json are written to that directory. Exit status is 0 on success, 2 when the
input is invalid or a verified property fails and 3 when the solver fails.
"""

import argparse
import logging

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from gbsde_lab import __version__
from gbsde_lab.compare import fuzz_comparison, random_problem
from gbsde_lab.constants import (
    BAND_TOL,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VALIDATION,
    REFINE_STEPS,
    RESIDUAL_TOL,
    SADDLE_MAX_DEPTH,
    SKOROHOD_TOL,
)
from gbsde_lab.engines import oracles
from gbsde_lab.exceptions import (
    GBSDEAssumptionError,
    GBSDEConfigError,
    GBSDEException,
    GBSDESolverError,
    GBSDETransformError,
)
from gbsde_lab.games import (
    dynkin_value,
    load_game,
    load_option,
    price_game_option,
    random_game,
    saddle_check,
    verify_hedge,
)
from gbsde_lab.logger import set_logging
from gbsde_lab.problem import AssumptionReport, load_problem
from gbsde_lab.regularize import ladder_orderings
from gbsde_lab.solver import SolverConfig, residual_report, solve, solve_via_transform
from gbsde_lab.transform import check_bounds, transform_data
from gbsde_lab.utils import dump_json, ensure_dir, get_yaml_data, write_json, write_table

logger = logging.getLogger(__name__)

MODES = ("solve", "dynkin", "option", "verify")
FORMATS = ("csv", "json")
VERIFY_TARGETS = ("comparison", "transform", "ladder", "saddle", "solver")
DEFAULT_BATCH = {"comparison": 100, "solver": 50, "saddle": 20}
SOLVER_FUZZ_STEPS = (4, 8, 16, 32)
LADDER_DEPTH = 4

SOLUTION_HEADER = ("step", "level", "Y", "Z", "dK_plus", "dK_minus")
REFINE_HEADER = ("N", "Y0_direct", "Y0_transform", "route_gap", "direct_change")
GAME_HEADER = ("step", "level", "Y", "stop_minimizer", "stop_maximizer")
OPTION_HEADER = ("step", "level", "S", "V", "gamma", "beta", "cancel")

Table = Tuple[Sequence[str], List[Sequence[Any]]]


@dataclass(frozen=True)
class RunRequest:
    mode: str
    config: Optional[Path] = None
    out: Optional[Path] = None
    output_format: str = "csv"
    steps: Optional[int] = None
    refine: bool = False
    seed: int = 0
    batch: Optional[int] = None
    target: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise GBSDEConfigError(f"unknown mode {self.mode!r}, expected one of {', '.join(MODES)}")
        if self.output_format not in FORMATS:
            raise GBSDEConfigError(f"unknown format {self.output_format!r}")
        if self.mode == "verify" and self.target not in VERIFY_TARGETS:
            raise GBSDEConfigError(f"verify needs one of {', '.join(VERIFY_TARGETS)}, got {self.target!r}")
        if self.mode in ("solve", "dynkin", "option") and self.config is None:
            raise GBSDEConfigError(f"mode {self.mode} needs --config")
        if self.refine and self.mode != "solve":
            raise GBSDEConfigError("--refine is only available for solve")
        if self.steps is not None and self.steps < 1:
            raise GBSDEConfigError(f"--steps must be positive, got {self.steps}")
        if self.batch is not None and self.batch < 1:
            raise GBSDEConfigError(f"--batch must be positive, got {self.batch}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunRequest":
        return cls(
            mode=args.mode,
            config=Path(args.config) if args.config else None,
            out=Path(args.out) if args.out else None,
            output_format=args.format,
            steps=args.steps,
            refine=getattr(args, "refine", False),
            seed=args.seed,
            batch=getattr(args, "batch", None),
            target=getattr(args, "target", None),
        )

    def configuration(self) -> dict:
        if self.config is None:
            raise GBSDEConfigError(f"{self.target or self.mode} needs --config")
        return get_yaml_data(self.config)


@dataclass
class RunResult:
    summary: Dict[str, Any]
    tables: Dict[str, Table]
    passed: bool = True


def solver_config(config: dict) -> SolverConfig:
    """Optional "solver" section: picard_tol, picard_max_iter, damping, bisection_fallback."""
    try:
        return SolverConfig(**(config.get("solver") or {}))
    except TypeError as ex:
        raise GBSDEConfigError(f"invalid solver section: {ex}")


def refine(request: RunRequest, config: Optional[dict] = None) -> Table:
    """
    Y0 over the refinement ladder by the direct and the transform route. The transform
    route is left empty for instances it does not apply to, such as infinite barriers
    or barriers without zero between them and no shift S.
    """
    config = config if config is not None else request.configuration()
    settings = solver_config(config)
    rows: List[Sequence[Any]] = []
    previous = None
    for steps in REFINE_STEPS:
        spec = load_problem(config, steps)
        direct = solve(spec, settings).root
        try:
            transformed: Optional[float] = solve_via_transform(spec, settings).root
        except (GBSDEAssumptionError, GBSDETransformError) as ex:
            logger.warning(f"Transform route unavailable at N = {steps}: {ex}")
            transformed = None
        gap = None if transformed is None else abs(direct - transformed)
        change = None if previous is None else abs(direct - previous)
        rows.append((steps, direct, transformed, gap, change))
        previous = direct
    return REFINE_HEADER, rows


def _solve(request: RunRequest) -> RunResult:
    config = request.configuration()
    spec = load_problem(config, request.steps)
    solution = solve(spec, solver_config(config))
    report = residual_report(spec, solution)
    plus, minus = solution.expected_totals(spec.measure)
    summary: Dict[str, Any] = {
        "mode": "solve",
        "name": spec.name,
        "steps": spec.grid.steps,
        "Y0": solution.root,
        "K_plus_T": plus,
        "K_minus_T": minus,
        "residuals": report.maxima(),
        "picard_iterations": solution.diagnostics["picard_iterations"],
        "fallback_nodes": solution.diagnostics["fallback_nodes"],
        "passed": report.passed(),
    }
    tables: Dict[str, Table] = {"solution": (SOLUTION_HEADER, list(solution.rows()))}
    if request.refine:
        header, rows = refine(request, config)
        tables["refine"] = (header, rows)
        summary["refine"] = [dict(zip(header, row)) for row in rows]
    return RunResult(summary, tables, report.passed())


def _node_list(nodes) -> List[List[int]]:
    return [[k, j] for k, j in sorted(nodes)]


def _dynkin(request: RunRequest) -> RunResult:
    config = request.configuration()
    game = load_game(config, request.steps)
    result = dynkin_value(game, solver_config(config))
    F_L, F_U, _, F_xi = game.utility_fields()
    recursion = oracles.game_recursion(F_L, F_U, F_xi, game.measure)
    recursion_gap = max(
        float(np.max(np.abs(result.value.step(k) - recursion.step(k)))) for k in range(game.grid.steps + 1)
    )
    regions = result.regions()
    summary: Dict[str, Any] = {
        "mode": "dynkin",
        "name": game.name,
        "steps": game.grid.steps,
        "value": result.root,
        "utility": game.utility.kind,
        "recursion_gap": recursion_gap,
        "minimizer_stops": _node_list(regions["minimizer"]),
        "maximizer_stops": _node_list(regions["maximizer"]),
    }
    passed = recursion_gap <= RESIDUAL_TOL
    if game.grid.steps <= SADDLE_MAX_DEPTH:
        saddle = saddle_check(game, solver_config(config))
        summary["saddle"] = saddle.summary()
        passed = passed and saddle.passed
    rows = []
    for k, j, y in result.value.rows():
        if k < game.grid.steps:
            rows.append((k, j, y, bool(result.stop_min[k][j]), bool(result.stop_max[k][j])))
        else:
            rows.append((k, j, y, None, None))
    summary["passed"] = passed
    return RunResult(summary, {"game": (GAME_HEADER, rows)}, passed)


def _option(request: RunRequest) -> RunResult:
    config = request.configuration()
    market, payoffs = load_option(config, request.steps)
    price = price_game_option(market, config=solver_config(config), **payoffs)
    hedge = verify_hedge(price)
    cancel = {(k, j) for k, j, flag in price.cancel.rows() if flag}
    summary = {
        "mode": "option",
        "steps": market.steps,
        "price": price.price,
        "risk_neutral_probability": market.risk_neutral_probability,
        "up": market.up,
        "down": market.down,
        "cancel_nodes": _node_list(cancel),
        "hedge": hedge.summary(),
        "passed": hedge.passed,
    }
    return RunResult(summary, {"option": (OPTION_HEADER, list(price.rows()))}, hedge.passed)


def _verify_comparison(request: RunRequest) -> RunResult:
    report = fuzz_comparison(request.seed, request.batch or DEFAULT_BATCH["comparison"])
    return RunResult(report.summary(), {}, report.passed)


def _verify_solver(request: RunRequest) -> RunResult:
    """Solver contract on a seeded batch of random instances."""
    rng = np.random.default_rng(request.seed)
    report = AssumptionReport("solver contract")
    batch = request.batch or DEFAULT_BATCH["solver"]
    for index in range(batch):
        steps = request.steps or int(rng.choice(SOLVER_FUZZ_STEPS))
        spec = load_problem(random_problem(rng, steps, f"instance {index}"))
        residuals = residual_report(spec, solve(spec))
        report.record("band", residuals.band, BAND_TOL, instance=index)
        report.record("skorohod", residuals.skorohod, SKOROHOD_TOL, instance=index)
        report.record("singularity", residuals.singularity, 0.0, instance=index)
        report.record("identity", residuals.identity, RESIDUAL_TOL, instance=index)
    report.details.update({"instances": batch, "seed": request.seed})
    return RunResult(report.summary(), {}, report.passed)


def _verify_transform(request: RunRequest) -> RunResult:
    spec = load_problem(request.configuration(), request.steps)
    report = check_bounds(transform_data(spec), seed=request.seed)
    return RunResult(report.summary(), {}, report.passed)


def _verify_ladder(request: RunRequest) -> RunResult:
    config = request.configuration()
    spec = load_problem(config, request.steps)
    report = ladder_orderings(spec, LADDER_DEPTH, LADDER_DEPTH, config=solver_config(config))
    return RunResult(report.summary(), {}, report.passed)


def _verify_saddle(request: RunRequest) -> RunResult:
    if request.config is not None:
        config = request.configuration()
        games = [load_game(config, request.steps)]
    else:
        batch = request.batch or DEFAULT_BATCH["saddle"]
        seeds = np.random.default_rng(request.seed).integers(0, 2 ** 31 - 1, batch)
        games = [random_game(int(seed), request.steps or SADDLE_MAX_DEPTH) for seed in seeds]
    reports = [saddle_check(game) for game in games]
    failures = [
        {"game": game.name, **report.summary()} for game, report in zip(games, reports) if not report.passed
    ]
    summary = {
        "name": "saddle",
        "games": len(games),
        "worst": max(report.worst for report in reports),
        "failures": failures,
        "passed": not failures,
    }
    return RunResult(summary, {}, not failures)


VERIFY: Dict[str, Callable[[RunRequest], RunResult]] = {
    "comparison": _verify_comparison,
    "transform": _verify_transform,
    "ladder": _verify_ladder,
    "saddle": _verify_saddle,
    "solver": _verify_solver,
}


def _verify(request: RunRequest) -> RunResult:
    result = VERIFY[request.target](request)
    result.summary = {"mode": "verify", "target": request.target, **result.summary}
    return result


HANDLERS: Dict[str, Callable[[RunRequest], RunResult]] = {
    "solve": _solve,
    "dynkin": _dynkin,
    "option": _option,
    "verify": _verify,
}


def emit(request: RunRequest, result: RunResult):
    if request.out is None:
        print(dump_json(result.summary), end="")
        return
    out = ensure_dir(request.out)
    for name, (header, rows) in result.tables.items():
        write_table(header, rows, out / name, request.output_format)
    write_json(result.summary, out / "summary.json")
    logger.info(f"Results written to {out}")


def run(request: RunRequest) -> int:
    """Execute one request and return the exit status."""
    try:
        result = HANDLERS[request.mode](request)
    except GBSDESolverError as ex:
        logger.error(f"Solver failed: {ex}")
        return EXIT_SOLVER
    except GBSDEException as ex:
        logger.error(f"{type(ex).__name__}: {ex}")
        return EXIT_VALIDATION
    emit(request, result)
    if not result.passed:
        logger.error(f"{request.target or request.mode}: verification failed")
        return EXIT_VALIDATION
    return EXIT_OK


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="problem, game or market configuration (JSON or YAML)")
    parser.add_argument("--out", help="directory for tables and summary.json; stdout when omitted")
    parser.add_argument("--format", choices=FORMATS, default="csv", help="format of the per-node tables")
    parser.add_argument("--steps", type=int, default=None, help="override grid.N")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gbsde-lab", description="Doubly reflected GBSDE lattice laboratory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    modes = parser.add_subparsers(dest="mode", required=True)

    solve_parser = modes.add_parser("solve", help="solve a problem instance")
    _common(solve_parser)
    solve_parser.add_argument("--refine", action="store_true", help=f"run N in {list(REFINE_STEPS)} by both routes")

    _common(modes.add_parser("dynkin", help="value and saddle rules of a Dynkin game"))
    _common(modes.add_parser("option", help="price and hedge a game option"))

    verify_parser = modes.add_parser("verify", help="check a property on seeded or configured instances")
    verify_parser.add_argument("target", choices=VERIFY_TARGETS)
    _common(verify_parser)
    verify_parser.add_argument("--batch", type=int, default=None, help="number of random instances")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_logging(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        request = RunRequest.from_args(args)
    except GBSDEConfigError as ex:
        logger.error(str(ex))
        return EXIT_VALIDATION
    return run(request)


if __name__ == "__main__":
    raise SystemExit(main())
