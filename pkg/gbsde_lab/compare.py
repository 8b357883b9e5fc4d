# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

"""
Comparison of two instances with ordered data: ordered solutions and ordered
reflection increments where the barriers coincide.
"""

import logging

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from gbsde_lab.constants import RESIDUAL_TOL
from gbsde_lab.exceptions import GBSDEConfigError
from gbsde_lab.problem import AssumptionReport, ProblemSpec, load_problem
from gbsde_lab.solver import LatticeSolution, SolverConfig, solve

logger = logging.getLogger(__name__)

ORDER_TOL = 1e-14
FUZZ_STEPS = (4, 8, 16)


@dataclass(frozen=True)
class OrderedPair:
    """spec1 is the instance expected to stay below spec2."""
    spec1: ProblemSpec
    spec2: ProblemSpec
    name: str = ""

    def __post_init__(self):
        if self.spec1.grid != self.spec2.grid:
            raise GBSDEConfigError("an ordered pair needs a common grid")

    def validate(self) -> AssumptionReport:
        """L1 <= L2 and U1 <= U2 at every node, xi1 <= xi2."""
        grid = self.spec1.grid
        report = AssumptionReport("barrier and terminal ordering")
        with np.errstate(invalid="ignore"):
            for k in range(grid.steps + 1):
                lower_gap = _gap(self.spec1.lower.step(k), self.spec2.lower.step(k))
                upper_gap = _gap(self.spec1.upper.step(k), self.spec2.upper.step(k))
                report.record_array("L1 <= L2", lower_gap, k, ORDER_TOL)
                report.record_array("U1 <= U2", upper_gap, k, ORDER_TOL)
        report.record_array("xi1 <= xi2", self.spec1.terminal - self.spec2.terminal, grid.steps, ORDER_TOL)
        return report

    def validate_along(self, solution: LatticeSolution) -> AssumptionReport:
        """
        f1 dt + g1 dA1 + dR1 <= f2 dt + g2 dA2 + dR2 evaluated at (Y1, Z1) on every
        node of steps 0..N-1.
        """
        grid = self.spec1.grid
        report = AssumptionReport("generator ordering")
        for k in range(grid.steps):
            Y, Z = solution.Y.step(k), solution.Z.step(k)
            sides = []
            for spec in (self.spec1, self.spec2):
                sides.append(
                    spec.f.evaluate(grid, k, Y, Z) * grid.dt
                    + spec.g.evaluate(grid, k, Y) * spec.clock.dA.step(k)
                    + spec.clock.dR.step(k)
                )
            report.record_array("h1 dA1 <= h2 dA2", sides[0] - sides[1], k, 1e-12)
        return report


def _gap(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """first - second with equal infinities counted as ordered."""
    return np.where(first == second, 0.0, first - second)


@dataclass
class ComparisonReport(AssumptionReport):
    solutions: Tuple[LatticeSolution, ...] = ()
    tested: int = 0

    def summary(self) -> dict:
        summary = super().summary()
        summary["tested"] = self.tested
        return summary


def compare_solutions(
    pair: OrderedPair, config: Optional[SolverConfig] = None, tolerance: float = RESIDUAL_TOL
) -> ComparisonReport:
    """Solve both instances and check Y1 <= Y2 + tolerance at every node."""
    ordering = pair.validate()
    if not ordering.passed:
        raise GBSDEConfigError(f"pair {pair.name!r} is not ordered: {'; '.join(ordering.violations)}")
    first, second = solve(pair.spec1, config), solve(pair.spec2, config)
    grid = pair.spec1.grid
    report = ComparisonReport("Y1 <= Y2", solutions=(first, second))
    for k in range(grid.steps + 1):
        report.record_array("Y1 <= Y2", first.Y.step(k) - second.Y.step(k), k, tolerance)
        report.tested += k + 1
    along = pair.validate_along(first)
    report.details.update({"generator ordering": along.passed, "roots": [first.root, second.root]})
    if not report.passed:
        report.details["Y1"] = [list(values) for values in first.Y.steps()]
        report.details["Y2"] = [list(values) for values in second.Y.steps()]
    return report


def increment_ordering(
    pair: OrderedPair, solutions: Tuple[LatticeSolution, LatticeSolution], tolerance: float = RESIDUAL_TOL
) -> ComparisonReport:
    """dK1- <= dK2- where U1 = U2 and dK2+ <= dK1+ where L1 = L2, on steps 0..N-1."""
    first, second = solutions
    grid = pair.spec1.grid
    report = ComparisonReport("increment ordering", solutions=tuple(solutions))
    for k in range(grid.steps):
        same_upper = pair.spec1.upper.step(k) == pair.spec2.upper.step(k)
        same_lower = pair.spec1.lower.step(k) == pair.spec2.lower.step(k)
        excess_minus = np.where(same_upper, first.dK_minus.step(k) - second.dK_minus.step(k), 0.0)
        excess_plus = np.where(same_lower, second.dK_plus.step(k) - first.dK_plus.step(k), 0.0)
        report.record_array("dK1- <= dK2- on {U1 = U2}", excess_minus, k, tolerance)
        report.record_array("dK2+ <= dK1+ on {L1 = L2}", excess_plus, k, tolerance)
        report.tested += int(np.count_nonzero(same_upper) + np.count_nonzero(same_lower))
    if not report.tested:
        report.details["note"] = "coincidence sets are empty, nothing tested"
    return report


def _affine(rng: np.random.Generator, low: float, high: float) -> Tuple[float, float]:
    """Coefficients (a, c) of a + c t on [0, 1] with both end values in [low, high]."""
    start, end = rng.uniform(low, high, 2)
    return float(start), float(end - start)


def _linear_or_quadratic(rng: np.random.Generator, steps: int) -> dict:
    if rng.uniform() < 0.5:
        limit = min(2.0, np.sqrt(steps))
        return {"kind": "linear", "params": {
            "a": float(rng.uniform(-1.0, 1.0)),
            "b": float(rng.uniform(-limit, limit)),
            "c": float(rng.uniform(-0.5, 0.5)),
        }}
    return {"kind": "quadratic_z", "params": {
        "c": float(rng.uniform(0.0, 0.8)),
        "offset": float(rng.uniform(-0.5, 0.5)),
    }}


def random_problem(
    rng: np.random.Generator, steps: int, name: str = "random", scale: Optional[float] = None
) -> dict:
    """
    Configuration of a random instance on [0, 1]: affine barriers with L in [-1, 0] and
    U in [0, 1], a clipped Brownian terminal value, a linear or quadratic-in-z driver f
    whose z-slope times sqrt(dt) stays below 1,
    constant g <= 0 and constant clock and forcing densities.
    """
    l0, l1 = _affine(rng, -1.0, 0.0)
    u0, u1 = _affine(rng, 0.0, 1.0)
    scale = float(rng.uniform(-1.0, 1.0)) if scale is None else scale
    return {
        "name": name,
        "grid": {"T": 1.0, "N": int(steps)},
        "barriers": {
            "L": {"kind": "affine", "a": l0, "c": l1},
            "U": {"kind": "affine", "a": u0, "c": u1},
        },
        "terminal": {"kind": "expression", "expr": f"min(max({scale!r} * B, {l0 + l1!r}), {u0 + u1!r})"},
        "driver_f": _linear_or_quadratic(rng, steps),
        "driver_g": {"kind": "constant", "params": {"c": float(-rng.uniform(0.0, 1.0))}},
        "clock": {
            "A": float(rng.uniform(0.0, 1.0)),
            "R_plus": float(rng.uniform(0.0, 0.5)),
            "R_minus": float(rng.uniform(0.0, 0.5)),
        },
    }


def random_ordered_pair(seed: int, steps: Optional[int] = None) -> Tuple[OrderedPair, Dict[str, dict]]:
    """
    Random pair with L1 <= L2, U1 <= U2, xi1 <= xi2, f2 = f1 + c with c >= 0,
    A2 <= A1 against the same g <= 0 and R2 = R1 + a nonnegative extra forcing.
    """
    rng = np.random.default_rng(seed)
    steps = int(steps if steps is not None else rng.choice(FUZZ_STEPS))
    scale = float(rng.uniform(-1.0, 1.0))
    first = random_problem(rng, steps, f"pair {seed} first", scale)
    second = {key: value for key, value in first.items()}
    second["name"] = f"pair {seed} second"

    lower, upper = first["barriers"]["L"], first["barriers"]["U"]
    room = min(upper["a"] - lower["a"], upper["a"] + upper["c"] - lower["a"] - lower["c"])
    lift_lower = float(rng.uniform(0.0, 1.0) * room)
    lift_upper = float(rng.uniform(0.0, 0.3))
    new_lower = {"kind": "affine", "a": lower["a"] + lift_lower, "c": lower["c"]}
    new_upper = {"kind": "affine", "a": upper["a"] + lift_upper, "c": upper["c"]}
    second["barriers"] = {"L": new_lower, "U": new_upper}
    lift_terminal = float(rng.uniform(0.0, 0.5))
    second["terminal"] = {"kind": "expression", "expr": (
        f"min(max({scale!r} * B + {lift_terminal!r}, {new_lower['a'] + new_lower['c']!r}), "
        f"{new_upper['a'] + new_upper['c']!r})"
    )}

    driver = {"kind": first["driver_f"]["kind"], "params": dict(first["driver_f"]["params"])}
    extra = float(rng.uniform(0.0, 0.5))
    if driver["kind"] == "linear":
        driver["params"]["c"] += extra
    else:
        driver["params"]["offset"] += extra
    second["driver_f"] = driver
    second["clock"] = dict(first["clock"])
    second["clock"]["A"] = first["clock"]["A"] * float(rng.uniform(0.0, 1.0))
    second["clock"]["R_plus"] = first["clock"]["R_plus"] + float(rng.uniform(0.0, 0.5))

    configs = {"first": first, "second": second}
    pair = OrderedPair(load_problem(first), load_problem(second), name=f"pair {seed}")
    return pair, configs


def fuzz_comparison(
    seed: int, batch: int = 100, config: Optional[SolverConfig] = None, tolerance: float = RESIDUAL_TOL
) -> ComparisonReport:
    """Seeded batch of random ordered pairs; any failing pair is listed with its configurations."""
    rng = np.random.default_rng(seed)
    report = ComparisonReport("comparison fuzz")
    failures: List[Dict[str, Any]] = []
    for index in range(batch):
        pair_seed = int(rng.integers(0, 2 ** 31 - 1))
        pair, configs = random_ordered_pair(pair_seed)
        ordering = compare_solutions(pair, config, tolerance)
        increments = increment_ordering(pair, ordering.solutions, tolerance)
        report.merge(ordering).merge(increments)
        report.tested += ordering.tested + increments.tested
        if not (ordering.passed and increments.passed):
            failures.append({"seed": pair_seed, "configs": configs, "worst": max(ordering.worst, increments.worst)})
    report.details = {"pairs": batch, "seed": seed, "failures": failures}
    logger.info(f"Comparison fuzz: {batch} pairs, {len(failures)} failing")
    return report
