# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

"""
Approximation ladder of the transformed equation: Lipschitz sup-convolutions of the
generators and truncation of the clock and forcing at the stopping times tau_n.
"""

import logging

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np

from gbsde_lab.constants import (
    LADDER_MAX_INDEX,
    LADDER_RESOLUTION,
    RESIDUAL_TOL,
    SUPCONV_CHUNK_SIZE,
    SUPCONV_MAX_OFFSETS,
    SUPCONV_RESOLUTION,
)
from gbsde_lab.exceptions import GBSDEAssumptionError, GBSDEConfigError, GBSDELatticeError
from gbsde_lab.lattice import AdaptedField, TimeGrid, cumulative_extremes, enumerate_paths, path_levels
from gbsde_lab.problem import AssumptionReport, ClockAndForcing, DriverF, DriverG, Envelopes, ProblemSpec
from gbsde_lab.solver import SolverConfig, residual_report, solve

logger = logging.getLogger(__name__)

Driver = Union[DriverF, DriverG]


def _offset_grid(dims: int, resolution: float, limit: int) -> Tuple[np.ndarray, float]:
    """Points of the L1 unit ball on a lattice of mesh h, coarsened to at most limit points."""
    if dims == 0:
        return np.zeros((1, 1)), resolution
    radius = int(np.floor(1.0 / resolution + 1e-9))
    if dims == 1:
        radius = min(radius, (limit - 1) // 2)
    else:
        radius = min(radius, int(np.floor(np.sqrt(limit / 2.0))))
    radius = max(radius, 1)
    ticks = np.arange(-radius, radius + 1)
    if dims == 1:
        points = ticks[:, None]
    else:
        a, b = np.meshgrid(ticks, ticks, indexing="ij")
        inside = np.abs(a) + np.abs(b) <= radius
        points = np.stack([a[inside], b[inside]], axis=1)
    return points / radius, 1.0 / radius


@dataclass(frozen=True)
class SupConvApprox:
    """
    f_n(x) = sup_p { max(f(p), -n) - n |p - x|_1 } over the variables f depends on.

    Offsets outside the unit L1 ball are never needed: their value is below -n while
    f_n >= -n at every point.
    """
    base: Driver
    n: int
    resolution: float = SUPCONV_RESOLUTION
    max_offsets: int = SUPCONV_MAX_OFFSETS
    offsets: np.ndarray = field(init=False, repr=False, compare=False)
    effective_resolution: float = field(init=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise GBSDEConfigError(f"sup-convolution index must be at least 1, got {self.n}")
        if not 0.0 < self.resolution <= 1.0:
            raise GBSDEConfigError(f"sup-convolution resolution must lie in (0, 1], got {self.resolution}")
        points, mesh = _offset_grid(len(self.base.arguments), self.resolution, self.max_offsets)
        offsets = np.zeros((points.shape[0], 2))
        for column_index, name in enumerate(self.base.arguments):
            offsets[:, ("y", "z").index(name)] = points[:, column_index]
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "effective_resolution", mesh)
        if mesh > self.resolution * (1.0 + 1e-9):
            logger.debug(f"sup-convolution grid coarsened from {self.resolution:g} to {mesh:g}")

    @property
    def is_f(self) -> bool:
        return isinstance(self.base, DriverF)

    def as_driver(self) -> Driver:
        """Driver of the same family evaluating f_n; envelopes (n, 0) for f and bound 1 for g."""
        n = float(self.n)
        params = {"n": self.n, "base": self.base.kind}
        if self.is_f:
            return DriverF(
                "supconv",
                lambda grid, k, y, z: supconv_eval(self, grid, k, y, z),
                self.base.arguments,
                params,
                lambda grid, k, band: (np.full(k + 1, n), np.zeros(k + 1)),
            )
        return DriverG(
            "supconv",
            lambda grid, k, y: supconv_eval(self, grid, k, y),
            self.base.arguments,
            params,
            lambda grid, k, band: np.ones(k + 1),
        )


def supconv_eval(approx: SupConvApprox, grid: TimeGrid, k: int, y, z=None) -> np.ndarray:
    """
    Grid value of f_n at the step-k points (y, z); per-node data runs along the first axis.
    The result is a lower bound of f_n that is exact wherever the sup is attained on the grid.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.zeros_like(y) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    shape = np.broadcast(y, z).shape
    y, z = np.broadcast_to(y, shape), np.broadcast_to(z, shape)
    floor = -float(approx.n)
    penalty = approx.n * np.abs(approx.offsets).sum(axis=1)
    chunk = max(1, SUPCONV_CHUNK_SIZE // max(1, int(np.prod(shape))))
    best = np.full(shape, -np.inf)
    for start in range(0, approx.offsets.shape[0], chunk):
        block = approx.offsets[start: start + chunk]
        shifted_y = y[..., None] + block[:, 0]
        if approx.is_f:
            values = approx.base.evaluate(grid, k, shifted_y, z[..., None] + block[:, 1])
        else:
            values = approx.base.evaluate(grid, k, shifted_y)
        values = np.where(np.isnan(values), -np.inf, values)
        candidates = np.maximum(values, floor) - penalty[start: start + chunk]
        best = np.maximum(best, candidates.max(axis=-1))
    return best


class TruncationLadder:
    """
    Running sum X_k = A_k + |R|_k + C_k + sum_{i<k} eta_i dt and the stopping times
    tau_n = first k with X_k >= n, capped at N.
    """

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        grid = spec.grid
        increments = (
            spec.clock.dA
            + spec.clock.dR_variation
            + spec.envelopes.eta.truncated(grid.steps - 1) * grid.dt
        )
        highest, lowest = cumulative_extremes(increments)
        self.increments = increments
        self.highest = highest + spec.envelopes.C
        self.lowest = lowest + spec.envelopes.C

    def __repr__(self):
        return f"TruncationLadder({self.spec.name!r})"

    def alive(self, n: float) -> AdaptedField:
        """1{k < tau_n} on steps 0..N-1; raises when tau_n is not decided by the node alone."""
        grid = self.spec.grid
        hit_any = self.highest.step(0) >= n
        hit_all = self.lowest.step(0) >= n
        masks = []
        for k in range(grid.steps):
            if np.any(hit_any != hit_all):
                raise GBSDELatticeError(f"tau_{n} is path dependent at step {k}; use truncation_steps")
            masks.append(np.where(hit_any, 0.0, 1.0))
            following_any = np.concatenate([[False], hit_any]) | np.concatenate([hit_any, [False]])
            following_all = np.concatenate([[True], hit_all]) & np.concatenate([hit_all, [True]])
            hit_any = following_any | (self.highest.step(k + 1) >= n)
            hit_all = following_all | (self.lowest.step(k + 1) >= n)
        return AdaptedField(grid, masks, name=f"1{{k < tau_{n}}}")

    def stationary_index(self) -> int:
        """Smallest integer n with tau_n = N on every path."""
        return int(np.floor(self.highest.max())) + 1

    def clock(self, n: float, i: float) -> ClockAndForcing:
        alive_n, alive_i = self.alive(n), self.alive(i)
        clock = self.spec.clock
        return ClockAndForcing(clock.dA * alive_n, clock.dR_plus * alive_i, clock.dR_minus * alive_i)

    def instance(self, n: int, i: int, resolution: float = LADDER_RESOLUTION) -> ProblemSpec:
        """The (n, i) equation: f_n, g_n, clock truncated at tau_n, forcing truncated at tau_i."""
        spec = self.spec
        f_n = SupConvApprox(spec.f, n, resolution).as_driver()
        g_n = SupConvApprox(spec.g, n, resolution).as_driver()
        grid = spec.grid
        return ProblemSpec(
            grid=grid,
            f=f_n,
            g=g_n,
            barriers=spec.barriers,
            terminal=spec.terminal,
            clock=self.clock(n, i),
            envelopes=Envelopes(
                AdaptedField.constant(grid, float(n), name="eta"), AdaptedField.zeros(grid, name="C")
            ),
            measure=spec.measure,
            name=f"{spec.name} ladder ({n}, {i})".strip(),
        )


def truncation_steps(spec: ProblemSpec, n: float) -> np.ndarray:
    """tau_n on every path of enumerate_paths(N), in that order."""
    if n < 0:
        raise GBSDEConfigError(f"truncation threshold must be nonnegative, got {n}")
    grid = spec.grid
    ladder = TruncationLadder(spec)
    levels = path_levels(enumerate_paths(grid.steps))
    running = np.concatenate(
        [np.zeros((levels.shape[0], 1)), np.cumsum(ladder.increments.along(levels), axis=1)], axis=1
    ) + spec.envelopes.C.along(levels)
    hit = running >= n
    return np.where(hit.any(axis=1), np.argmax(hit, axis=1), grid.steps)


def _expected_cumulative(increments: AdaptedField, probability: AdaptedField) -> np.ndarray:
    totals = [float(np.dot(probability.step(k), increments.step(k))) for k in range(increments.final_step + 1)]
    return np.cumsum(totals)


def ladder_orderings(
    spec: ProblemSpec,
    n_max: int,
    i_max: int,
    resolution: float = LADDER_RESOLUTION,
    config: Optional[SolverConfig] = None,
    tolerance: float = RESIDUAL_TOL,
) -> AssumptionReport:
    """
    Solve the (n, i) ladder for 1 <= n <= n_max, 1 <= i <= i_max and check
    L <= Y^{n,i} <= Y^{n,i+1} <= U and Y^{n+1,i} <= Y^{n,i} at every node, plus
    E[K^{n,i,+}] >= E[K^{n,i+1,+}] and E[K^{n,i+1,-}] >= E[K^{n,i,-}] cumulated up to each step.
    """
    for label, value in (("n_max", n_max), ("i_max", i_max)):
        if not 1 <= value <= LADDER_MAX_INDEX:
            raise GBSDEConfigError(f"{label} must lie in [1, {LADDER_MAX_INDEX}], got {value}")
    if spec.clock.dR.min() < 0.0:
        raise GBSDEAssumptionError("the ladder needs a nondecreasing forcing R")

    grid = spec.grid
    ladder = TruncationLadder(spec)
    probability = spec.measure.node_probabilities(grid, grid.steps - 1)
    report = AssumptionReport("ladder orderings")
    solutions = {}
    for n in range(1, n_max + 1):
        for i in range(1, i_max + 1):
            instance = ladder.instance(n, i, resolution)
            solution = solve(instance, config)
            band = residual_report(instance, solution).band
            report.record("L <= Y <= U", band, tolerance, n=n, i=i)
            solutions[(n, i)] = solution

    for (n, i), solution in solutions.items():
        where = f"at (n, i) = ({n}, {i})"
        if (n, i + 1) in solutions:
            richer = solutions[(n, i + 1)]
            for k in range(grid.steps + 1):
                gap = solution.Y.step(k) - richer.Y.step(k)
                report.record_array(f"Y nondecreasing in i {where}", gap, k, tolerance)
            plus_gap = (
                _expected_cumulative(richer.dK_plus, probability)
                - _expected_cumulative(solution.dK_plus, probability)
            )
            minus_gap = (
                _expected_cumulative(solution.dK_minus, probability)
                - _expected_cumulative(richer.dK_minus, probability)
            )
            report.record_array(f"E[K+] nonincreasing in i {where}", plus_gap, grid.steps, tolerance)
            report.record_array(f"E[K-] nondecreasing in i {where}", minus_gap, grid.steps, tolerance)
        if (n + 1, i) in solutions:
            stronger = solutions[(n + 1, i)]
            for k in range(grid.steps + 1):
                gap = stronger.Y.step(k) - solution.Y.step(k)
                report.record_array(f"Y nonincreasing in n {where}", gap, k, tolerance)

    roots: Dict[str, float] = {f"{n},{i}": solution.root for (n, i), solution in solutions.items()}
    report.details.update({"roots": roots, "stationary index": ladder.stationary_index()})
    logger.info(f"Ladder orderings over {len(solutions)} instances: passed={report.passed}")
    return report
