# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

"""
Exponential change of variables Ybar = exp(m (Y - m)).

It maps an instance with quadratic growth in z and barriers straddling 0 to one with
f <= 0, -1 <= g <= 0, a nonnegative forcing and barriers inside (0, 1).
"""

import logging

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence, Tuple

import numpy as np

from gbsde_lab.constants import BAND_TOL, FORCING_CLOCK_RATIO, VALIDATION_SAMPLES, VALIDATION_Z_RANGE
from gbsde_lab.exceptions import GBSDETransformError
from gbsde_lab.lattice import (
    AdaptedField,
    cumulative_extremes,
    path_levels,
    running_max_extremes,
)
from gbsde_lab.problem import (
    AssumptionReport,
    BarrierPair,
    ClockAndForcing,
    DriverF,
    DriverG,
    Envelopes,
    ProblemSpec,
    column,
    terminal_values,
)
from gbsde_lab.solver import LatticeSolution

logger = logging.getLogger(__name__)

RECOMBINATION_TOL = 1e-13


def _recombines(highest: AdaptedField, lowest: AdaptedField) -> bool:
    return all(
        np.allclose(hi, lo, rtol=RECOMBINATION_TOL, atol=RECOMBINATION_TOL)
        for hi, lo in zip(highest.steps(), lowest.steps())
    )


def compute_m(spec: ProblemSpec) -> AdaptedField:
    """
    m_k = sup_{i<=k} |U_i| + 2 sup_{i<=k} |C_i| + |R|_k + A_k + 1 on node storage.

    Every summand is computed as its largest and smallest value over the paths reaching
    a node; when they differ the running quantity does not recombine.
    """
    if not spec.upper.is_finite():
        raise GBSDETransformError("transform needs a finite upper barrier")
    parts = (
        running_max_extremes(spec.upper.map(np.abs)),
        running_max_extremes(spec.envelopes.C.map(np.abs)),
        cumulative_extremes(spec.clock.dR_variation),
        cumulative_extremes(spec.clock.dA),
    )
    for highest, lowest in parts:
        if not _recombines(highest, lowest):
            raise GBSDETransformError("path-dependent m; use path oracle")
    sup_U, sup_C, variation_R, A = (highest for highest, _ in parts)
    m = sup_U + sup_C * 2.0 + variation_R + A + 1.0
    m.name = "m"
    return m


def m_increments(m: AdaptedField) -> AdaptedField:
    """Predictable dm_k = m_{k+1} - m_k, equal on both branches."""
    grid = m.grid
    increments = []
    for k in range(grid.steps):
        following = m.step(k + 1)
        up, down = following[1:] - m.step(k), following[:-1] - m.step(k)
        if not np.allclose(up, down, rtol=0.0, atol=RECOMBINATION_TOL * (1.0 + np.max(np.abs(following)))):
            raise GBSDETransformError(f"m increment at step {k} depends on the branch; use path oracle")
        increments.append(up)
    return AdaptedField(grid, increments, name="dm")


def running_m_on_path(spec: ProblemSpec, path: Sequence[int]) -> np.ndarray:
    """m along one explicit path, valid also when m does not recombine."""
    path = np.asarray(path, dtype=int)
    levels = path_levels(path)
    n = len(path)
    U = np.abs(spec.upper.along(levels)[0, : n + 1])
    C = np.abs(spec.envelopes.C.along(levels)[0, : n + 1])
    dA = spec.clock.dA.along(levels)[0, :n]
    dR = spec.clock.dR_variation.along(levels)[0, :n]
    A = np.concatenate([[0.0], np.cumsum(dA)])
    R = np.concatenate([[0.0], np.cumsum(dR)])
    return np.maximum.accumulate(U) + 2.0 * np.maximum.accumulate(C) + R + A + 1.0


@dataclass(frozen=True)
class TransformBundle:
    source: ProblemSpec
    spec: ProblemSpec
    m: AdaptedField
    dm: AdaptedField
    rho_A: AdaptedField
    rho_R: AdaptedField
    f_tilde: Callable
    g_tilde: Callable

    @property
    def terminal(self) -> np.ndarray:
        return self.spec.terminal

    @property
    def lower(self) -> AdaptedField:
        return self.spec.lower

    @property
    def upper(self) -> AdaptedField:
        return self.spec.upper

    @property
    def f_bar(self) -> DriverF:
        return self.spec.f

    @property
    def g_bar(self) -> DriverG:
        return self.spec.g

    @property
    def dA_bar(self) -> AdaptedField:
        return self.spec.clock.dA

    @property
    def dR_bar(self) -> AdaptedField:
        return self.spec.clock.dR

    def rows(self) -> Iterator[Tuple]:
        """(step, level, m, Lbar, Ubar, dAbar, dRbar) for inspection."""
        last = self.spec.grid.steps
        for k, j, m in self.m.rows():
            increments = (self.dA_bar[k][j], self.dR_bar[k][j]) if k < last else (None, None)
            yield (k, j, m, self.lower[k][j], self.upper[k][j]) + increments


def transform_data(spec: ProblemSpec) -> TransformBundle:
    """Build the transformed instance; the Radon-Nikodym factors dA/dm, dR/dm are increment ratios."""
    grid = spec.grid
    if not (spec.lower.is_finite() and spec.upper.is_finite()):
        raise GBSDETransformError("transform needs finite barriers")
    m = compute_m(spec)
    dm = m_increments(m)
    dA, dR = spec.clock.dA, spec.clock.dR
    for k in range(grid.steps):
        flat = dm.step(k) <= 0.0
        if np.any(flat & ((dA.step(k) > 0.0) | (dR.step(k) != 0.0))):
            raise GBSDETransformError(f"dm = 0 while the clock or forcing moves at step {k}")
    with np.errstate(divide="ignore", invalid="ignore"):
        rho_A = dA.combine(dm, lambda a, d: np.where(d > 0.0, a / d, 0.0), name="dA/dm")
        rho_R = dR.combine(dm, lambda r, d: np.where(d > 0.0, r / d, 0.0), name="dR/dm")

    lower_bar = spec.lower.combine(m, lambda L, mk: np.exp(mk * (L - mk)), name="Lbar")
    upper_bar = spec.upper.combine(m, lambda U, mk: np.exp(mk * (U - mk)), name="Ubar")
    m_T = m.step(grid.steps)
    terminal_bar = np.exp(m_T * (spec.terminal - m_T))
    eta = spec.envelopes.eta
    f, g = spec.f, spec.g

    def f_tilde(grid, k, ybar, zbar):
        ndim = np.broadcast(ybar, zbar).ndim
        mk = column(m.step(k), ndim)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            y = np.log(ybar) / mk + mk
            z = zbar / (mk * ybar)
            return ybar * mk * f.evaluate(grid, k, y, z) - zbar ** 2 / (2.0 * ybar)

    def f_bar(grid, k, ybar, zbar):
        ndim = np.broadcast(ybar, zbar).ndim
        projected = np.minimum(np.maximum(ybar, column(lower_bar.step(k), ndim)), column(upper_bar.step(k), ndim))
        return f_tilde(grid, k, projected, zbar) - column(eta.step(k) * m.step(k), ndim)

    def g_tilde(grid, k, ybar):
        ndim = np.ndim(ybar)
        mk = column(m.step(k), ndim)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            log_term = np.log(ybar) / mk
            return ybar * (
                mk * g.evaluate(grid, k, log_term + mk) * column(rho_A.step(k), ndim)
                + mk * column(rho_R.step(k), ndim)
                + (mk - log_term)
            )

    def g_bar(grid, k, ybar):
        ndim = np.ndim(ybar)
        mk = column(m.step(k), ndim)
        projected = np.minimum(np.maximum(ybar, column(lower_bar.step(k), ndim)), column(upper_bar.step(k), ndim))
        return (g_tilde(grid, k, projected) - 4.0 * mk) / (8.0 * mk)

    dA_bar = m.truncated(grid.steps - 1) * dm * 8.0
    # g_tilde dm = g_bar dA_bar + 4 m dm, and 4 m dm = dA_bar / 2
    dR_bar = dA_bar * FORCING_CLOCK_RATIO + eta.truncated(grid.steps - 1) * m.truncated(grid.steps - 1) * grid.dt
    transformed = ProblemSpec(
        grid=grid,
        f=DriverF("transformed", f_bar, ("y", "z"), {"base": f.kind}),
        g=DriverG("transformed", g_bar, ("y",), {"base": g.kind}, lambda grid, k, band: np.ones(k + 1)),
        barriers=BarrierPair(lower_bar, upper_bar),
        terminal=terminal_values(grid, terminal_bar),
        clock=ClockAndForcing(dA_bar, dR_bar, AdaptedField.zeros(grid, grid.steps - 1)),
        envelopes=Envelopes(eta * m * 2.0, lower_bar.map(lambda v: 2.0 / v)),
        measure=spec.measure,
        name=f"{spec.name} transformed".strip(),
    )
    logger.debug(f"Transformed {spec.name!r}: m in [{m.min():.6g}, {m.max():.6g}]")
    return TransformBundle(spec, transformed, m, dm, rho_A, rho_R, f_tilde, g_tilde)


def map_solution_forward(solution: LatticeSolution, bundle: TransformBundle) -> LatticeSolution:
    """Ybar = exp(m (Y - m)), Zbar = m Ybar Z, dKbar+ = m Lbar dK+, dKbar- = m Ubar dK-."""
    source, m = bundle.source, bundle.m
    for k in range(source.grid.steps + 1):
        Y = solution.Y.step(k)
        excess = np.maximum(source.lower.step(k) - Y, Y - source.upper.step(k))
        if np.any(excess > BAND_TOL * (1.0 + np.abs(Y))):
            raise GBSDETransformError(f"not a solution: Y leaves [L, U] at step {k}")
    Y_bar = solution.Y.combine(m, lambda y, mk: np.exp(mk * (y - mk)), name="Ybar")
    scale = m * Y_bar
    return LatticeSolution(
        solution.grid,
        Y_bar,
        solution.Z.combine(scale, np.multiply, name="Zbar"),
        solution.dK_plus.combine(m * bundle.lower, np.multiply, name="dKbar+"),
        solution.dK_minus.combine(m * bundle.upper, np.multiply, name="dKbar-"),
        {"route": "forward map"},
    )


def map_solution_inverse(solution: LatticeSolution, bundle: TransformBundle) -> LatticeSolution:
    """Y = ln(Ybar) / m + m, Z = Zbar / (m Ybar), dK = dKbar / (m Ybar)."""
    if solution.Y.min() <= 0.0:
        raise GBSDETransformError("inverse undefined: Ybar must be positive")
    m = bundle.m
    Y = solution.Y.combine(m, lambda y, mk: np.log(y) / mk + mk, name="Y")
    scale = m * solution.Y
    return LatticeSolution(
        solution.grid,
        Y,
        solution.Z.combine(scale, np.divide, name="Z"),
        solution.dK_plus.combine(scale, np.divide, name="dK+"),
        solution.dK_minus.combine(scale, np.divide, name="dK-"),
        dict(solution.diagnostics, route="inverse map"),
    )


def check_bounds(bundle: TransformBundle, samples: int = VALIDATION_SAMPLES, seed: int = 0) -> AssumptionReport:
    """
    Bounds of the transformed data: m >= 1 and nondecreasing, 0 < Lbar <= exp(-m^2) <= Ubar
    <= exp(-1), Lbar_T <= xibar <= Ubar_T, dAbar >= 0 and dRbar >= 0 at every node, and on
    random (ybar, zbar) samples -eta m - zbar^2/Lbar <= ftilde <= eta m,
    -2 eta m - zbar^2/Lbar <= fbar <= 0, |gtilde| <= 4m and -1 <= gbar <= 0.
    """
    rng = np.random.default_rng(seed)
    spec, grid = bundle.spec, bundle.spec.grid
    report = AssumptionReport("transform bounds")
    tol = 1e-14
    for k in range(grid.steps + 1):
        m = bundle.m.step(k)
        L_bar, U_bar = spec.lower.step(k), spec.upper.step(k)
        middle = np.exp(-m ** 2)
        report.record_array("m >= 1", 1.0 - m, k, tol)
        report.record_array("Lbar > 0", np.where(L_bar > 0.0, 0.0, np.inf), k)
        report.record_array("Lbar <= exp(-m^2)", L_bar - middle, k, tol)
        report.record_array("exp(-m^2) <= Ubar", middle - U_bar, k, tol)
        report.record_array("Ubar <= exp(-1)", U_bar - np.exp(-1.0), k, tol)
        if k == grid.steps:
            report.record_array("Lbar_T <= xibar", L_bar - spec.terminal, k, tol)
            report.record_array("xibar <= Ubar_T", spec.terminal - U_bar, k, tol)
            break
        report.record_array("dm >= 0", -bundle.dm.step(k), k)
        report.record_array("dAbar >= 0", -spec.clock.dA.step(k), k)
        report.record_array("dRbar >= 0", -spec.clock.dR.step(k), k)

        y_bar = L_bar[:, None] + (U_bar - L_bar)[:, None] * rng.uniform(size=(k + 1, samples))
        z_bar = rng.uniform(-VALIDATION_Z_RANGE, VALIDATION_Z_RANGE, size=(k + 1, samples))
        eta_m = column(bundle.source.envelopes.eta.step(k) * m, 2)
        mk, L_col = column(m, 2), column(L_bar, 2)
        quadratic = z_bar ** 2 / L_col

        f_tilde = bundle.f_tilde(grid, k, y_bar, z_bar)
        report.record_array("ftilde <= eta m", f_tilde - eta_m, k, 1e-12 * (1.0 + eta_m), y=y_bar, z=z_bar)
        floor = -eta_m - quadratic
        report.record_array("ftilde >= -eta m - zbar^2/Lbar", floor - f_tilde, k, 1e-12 * (1.0 - floor))
        f_bar = spec.f.evaluate(grid, k, y_bar, z_bar)
        report.record_array("fbar <= 0", f_bar, k, 1e-12 * (1.0 + eta_m), y=y_bar, z=z_bar)
        floor = -2.0 * eta_m - quadratic
        report.record_array("fbar >= -2 eta m - zbar^2/Lbar", floor - f_bar, k, 1e-12 * (1.0 - floor))
        g_tilde = bundle.g_tilde(grid, k, y_bar)
        report.record_array("|gtilde| <= 4m", np.abs(g_tilde) - 4.0 * mk, k, 1e-12 * mk, y=y_bar)
        g_bar = spec.g.evaluate(grid, k, y_bar)
        report.record_array("gbar <= 0", g_bar, k, 1e-12, y=y_bar)
        report.record_array("gbar >= -1", -1.0 - g_bar, k, 1e-12, y=y_bar)
    logger.debug(f"Transform bounds: {report.checked} checks, passed={report.passed}")
    return report

