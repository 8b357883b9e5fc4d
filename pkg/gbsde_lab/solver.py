# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

import logging

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, Optional, Tuple

import numpy as np

from scipy.optimize import root_scalar

from gbsde_lab.constants import (
    BAND_TOL,
    PICARD_DAMPING,
    PICARD_MAX_ITER,
    PICARD_TOL,
    RESIDUAL_TOL,
    SKOROHOD_TOL,
)
from gbsde_lab.exceptions import GBSDEConfigError, GBSDESolverError
from gbsde_lab.lattice import AdaptedField, BranchMeasure, TimeGrid, expect_step, martingale_rep_step
from gbsde_lab.problem import ProblemSpec, shift_by_S, unshift_solution

logger = logging.getLogger(__name__)

BRACKET_EXPANSIONS = 64


@dataclass(frozen=True)
class SolverConfig:
    picard_tol: float = PICARD_TOL
    picard_max_iter: int = PICARD_MAX_ITER
    damping: float = PICARD_DAMPING
    bisection_fallback: bool = True

    def __post_init__(self):
        if not self.picard_tol > 0:
            raise GBSDEConfigError(f"picard_tol must be positive, got {self.picard_tol}")
        if not 0 < self.damping <= 1:
            raise GBSDEConfigError(f"damping must lie in (0, 1], got {self.damping}")
        if self.picard_max_iter < 1:
            raise GBSDEConfigError(f"picard_max_iter must be at least 1, got {self.picard_max_iter}")


@dataclass(frozen=True)
class StepResult:
    Y: np.ndarray
    Z: np.ndarray
    dK_plus: np.ndarray
    dK_minus: np.ndarray
    iterations: int = 0
    fallback_nodes: int = 0


@dataclass(frozen=True)
class LatticeSolution:
    """Y on steps 0..N, Z and the reflection increments dK+/dK- on steps 0..N-1."""
    grid: TimeGrid
    Y: AdaptedField
    Z: AdaptedField
    dK_plus: AdaptedField
    dK_minus: AdaptedField
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def root(self) -> float:
        return float(self.Y.step(0)[0])

    def rows(self) -> Iterator[Tuple]:
        """(step, level, Y, Z, dK+, dK-); the terminal step carries no increments."""
        for k, j, y in self.Y.rows():
            if k < self.grid.steps:
                yield k, j, y, self.Z[k][j], self.dK_plus[k][j], self.dK_minus[k][j]
            else:
                yield k, j, y, None, None, None

    def expected_totals(self, measure: BranchMeasure) -> Tuple[float, float]:
        """E[K+_T] and E[K-_T]."""
        probability = measure.node_probabilities(self.grid, self.grid.steps - 1)
        plus = sum(float(np.dot(probability.step(k), self.dK_plus.step(k))) for k in range(self.grid.steps))
        minus = sum(float(np.dot(probability.step(k), self.dK_minus.step(k))) for k in range(self.grid.steps))
        return plus, minus


def _picard(e: np.ndarray, forcing: Callable, config: SolverConfig) -> Tuple[np.ndarray, np.ndarray, int]:
    y = e + forcing(e)
    converged = np.zeros(e.shape, dtype=bool)
    iteration = 0
    for iteration in range(1, config.picard_max_iter + 1):
        with np.errstate(invalid="ignore", over="ignore"):
            new = (1.0 - config.damping) * y + config.damping * (e + forcing(y))
            converged = np.isfinite(new) & (np.abs(new - y) <= config.picard_tol * (1.0 + np.abs(new)))
        y = new
        if converged.all():
            break
    return y, converged, iteration


def _bracket_root(residual: Callable[[float], float], centre: float, width: float) -> Optional[Tuple[float, float]]:
    width = width if np.isfinite(width) and width > 0 else 1.0
    for _ in range(BRACKET_EXPANSIONS):
        low, high = centre - width, centre + width
        r_low, r_high = residual(low), residual(high)
        if np.isfinite(r_low) and np.isfinite(r_high) and r_low <= 0.0 <= r_high:
            return low, high
        width *= 2.0
    return None


def backward_step(
    spec: ProblemSpec, k: int, next_values: np.ndarray, config: Optional[SolverConfig] = None
) -> StepResult:
    """
    One step of the backward sweep for all nodes of step k.

    Solves y = E[Y_{k+1}] + f(t, y, z) dt + g(t, y) dA + dR with z from the martingale
    representation of Y_{k+1}, then projects y on [L, U]; the projection distance is the
    reflection increment. The generators are evaluated at the projected value so that the
    one-step identity holds at Y itself.
    """
    config = config or SolverConfig()
    grid = spec.grid
    next_values = np.asarray(next_values, dtype=float)
    if next_values.shape != (k + 2,):
        raise GBSDESolverError(f"expected {k + 2} successor values, got shape {next_values.shape}", step=k)
    if not np.all(np.isfinite(next_values)):
        raise GBSDESolverError("non-finite successor values", step=k)

    e = expect_step(next_values, grid, k, spec.measure)
    z = martingale_rep_step(next_values, grid)
    L, U = spec.lower.step(k), spec.upper.step(k)
    dA, dR = spec.clock.dA.step(k), spec.clock.dR.step(k)

    def forcing(y: np.ndarray) -> np.ndarray:
        projected = np.minimum(np.maximum(y, L), U)
        return (
            spec.f.evaluate(grid, k, projected, z) * grid.dt
            + spec.g.evaluate(grid, k, projected) * dA
            + dR
        )

    y, converged, iterations = _picard(e, forcing, config)
    stalled = np.flatnonzero(~converged)
    if stalled.size:
        if not config.bisection_fallback:
            j = int(stalled[0])
            raise GBSDESolverError(
                "generator fixed point not found", step=k, level=j,
                diagnostics={"e": float(e[j]), "z": float(z[j]), "last": float(y[j])},
            )
        y = np.where(converged, y, e)
        eta, C = spec.envelopes.eta.step(k), spec.envelopes.C.step(k)
        width = (eta + C / 2.0 * z ** 2) * grid.dt + np.abs(dA) + np.abs(dR)
        for j in stalled:
            y[j] = _solve_node(k, int(j), y, e, z, forcing, float(width[j]))
    dK_plus = np.maximum(L - y, 0.0)
    dK_minus = np.maximum(y - U, 0.0)
    Y = np.minimum(np.maximum(y, L), U)
    logger.debug(f"step {k}: {iterations} Picard iterations, {stalled.size} nodes bracketed")
    return StepResult(Y, z, dK_plus, dK_minus, iterations, int(stalled.size))


def _solve_node(
    k: int, j: int, y: np.ndarray, e: np.ndarray, z: np.ndarray, forcing: Callable, width: float
) -> float:
    trial = y.copy()

    def residual(value: float) -> float:
        trial[j] = value
        return float(value - e[j] - forcing(trial)[j])

    bracket = _bracket_root(residual, float(e[j]), width)
    if bracket is None:
        raise GBSDESolverError(
            "generator fixed point not found", step=k, level=j,
            diagnostics={"e": float(e[j]), "z": float(z[j]), "width": width},
        )
    low, high = bracket
    if residual(low) == 0.0:
        return low
    result = root_scalar(residual, bracket=[low, high], method="brentq", xtol=1e-15)
    if not result.converged:
        raise GBSDESolverError(
            "generator fixed point not found", step=k, level=j,
            diagnostics={"e": float(e[j]), "bracket": (low, high), "flag": result.flag},
        )
    return float(result.root)


def solve(spec: ProblemSpec, config: Optional[SolverConfig] = None) -> LatticeSolution:
    """Backward sweep from the terminal condition; residuals are stored in diagnostics."""
    config = config or SolverConfig()
    grid = spec.grid
    xi = np.asarray(spec.terminal, dtype=float)
    L_T, U_T = spec.lower.step(grid.steps), spec.upper.step(grid.steps)
    if np.any(xi < L_T) or np.any(xi > U_T):
        raise GBSDEConfigError("terminal value outside [L_T, U_T]")

    Y = [None] * (grid.steps + 1)
    Z, dK_plus, dK_minus = [None] * grid.steps, [None] * grid.steps, [None] * grid.steps
    Y[grid.steps] = xi
    iterations, fallback_nodes = 0, 0
    for k in range(grid.steps - 1, -1, -1):
        result = backward_step(spec, k, Y[k + 1], config)
        Y[k], Z[k], dK_plus[k], dK_minus[k] = result.Y, result.Z, result.dK_plus, result.dK_minus
        iterations = max(iterations, result.iterations)
        fallback_nodes += result.fallback_nodes

    solution = LatticeSolution(
        grid,
        AdaptedField(grid, Y, "Y"),
        AdaptedField(grid, Z, "Z"),
        AdaptedField(grid, dK_plus, "dK+"),
        AdaptedField(grid, dK_minus, "dK-"),
    )
    report = residual_report(spec, solution)
    solution.diagnostics.update({
        "picard_iterations": iterations,
        "fallback_nodes": fallback_nodes,
        "residuals": report.maxima(),
    })
    logger.info(
        f"Solved {spec.name or 'instance'} on {grid.steps} steps: Y0 = {solution.root:.12g}, "
        f"max identity residual = {report.identity:.3e}"
    )
    return solution


@dataclass
class ResidualReport:
    band: float = 0.0
    skorohod: float = 0.0
    singularity: float = 0.0
    identity: float = 0.0
    terminal: float = 0.0
    locations: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    def maxima(self) -> Dict[str, float]:
        return {
            "band": self.band,
            "skorohod": self.skorohod,
            "singularity": self.singularity,
            "identity": self.identity,
            "terminal": self.terminal,
        }

    def passed(self, tolerance: float = RESIDUAL_TOL) -> bool:
        return (
            self.band <= BAND_TOL
            and self.skorohod <= SKOROHOD_TOL
            and self.singularity == 0.0
            and self.identity <= tolerance
            and self.terminal <= tolerance
        )

    def _update(self, name: str, values: np.ndarray, k: int):
        values = np.where(np.isnan(values), np.inf, values)
        j = int(np.argmax(values))
        if values[j] > getattr(self, name):
            setattr(self, name, float(values[j]))
            self.locations[name] = (k, j)


def residual_report(spec: ProblemSpec, solution: LatticeSolution) -> ResidualReport:
    """
    Worst band violation, Skorohod product, singularity product and one-step identity
    residual Y_{k+1} - (Y_k - f dt - g dA - dR - dK+ + dK- + Z dW) over all nodes and branches.
    """
    grid = spec.grid
    report = ResidualReport()
    report._update("terminal", np.abs(solution.Y.step(grid.steps) - spec.terminal), grid.steps)
    for k in range(grid.steps + 1):
        Y, L, U = solution.Y.step(k), spec.lower.step(k), spec.upper.step(k)
        report._update("band", np.maximum(np.maximum(L - Y, Y - U), 0.0), k)
        if k == grid.steps:
            break
        Z, plus, minus = solution.Z.step(k), solution.dK_plus.step(k), solution.dK_minus.step(k)
        with np.errstate(invalid="ignore"):
            report._update("skorohod", np.abs(np.where(plus > 0.0, (Y - L) * plus, 0.0)), k)
            report._update("skorohod", np.abs(np.where(minus > 0.0, (U - Y) * minus, 0.0)), k)
        report._update("singularity", np.abs(plus * minus), k)

        drift = (
            spec.f.evaluate(grid, k, Y, Z) * grid.dt
            + spec.g.evaluate(grid, k, Y) * spec.clock.dA.step(k)
            + spec.clock.dR.step(k)
        )
        base = Y - drift - plus + minus
        dw_up, dw_down = spec.measure.increments(grid, k)
        following = solution.Y.step(k + 1)
        report._update("identity", np.abs(following[1:] - (base + Z * dw_up)), k)
        report._update("identity", np.abs(following[:-1] - (base + Z * dw_down)), k)
    return report


def solve_via_transform(spec: ProblemSpec, config: Optional[SolverConfig] = None) -> LatticeSolution:
    """
    Solve through the exponential change of variables: shift to L <= 0 <= U when S is
    given, transform, solve the transformed instance, map back and undo the shift.
    """
    from gbsde_lab.transform import map_solution_inverse, transform_data

    shifted = shift_by_S(spec)
    bundle = transform_data(shifted)
    transformed = solve(bundle.spec, config)
    solution = unshift_solution(spec, map_solution_inverse(transformed, bundle))
    report = residual_report(spec, solution)
    solution.diagnostics.update({
        "route": "transform",
        "transformed_root": transformed.root,
        "residuals": report.maxima(),
    })
    logger.info(f"Transform route on {spec.grid.steps} steps: Y0 = {solution.root:.12g}")
    return solution
