# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

import logging

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from gbsde_lab.constants import (
    VALIDATION_SAMPLES,
    VALIDATION_Y_RANGE,
    VALIDATION_Z_RANGE,
)
from gbsde_lab.engines import catalog
from gbsde_lab.engines.catalog import NodeFunction
from gbsde_lab.exceptions import GBSDEAssumptionError, GBSDEConfigError
from gbsde_lab.lattice import (
    AdaptedField,
    BranchMeasure,
    TimeGrid,
    cumulative_extremes,
    expect_step,
    martingale_rep_step,
)
from gbsde_lab.utils import get_yaml_data, parse_real

logger = logging.getLogger(__name__)

FieldLike = Union[float, np.ndarray, AdaptedField, NodeFunction]

MAX_REPORTED_VIOLATIONS = 20


def node_arguments(grid: TimeGrid, k: int, ndim: int) -> Tuple[float, np.ndarray]:
    """Time and Brownian value of step k shaped to broadcast against ndim-dimensional node data."""
    return grid.time(k), column(grid.brownian(k), ndim)


def column(values: np.ndarray, ndim: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values.reshape(values.shape + (1,) * max(ndim - 1, 0))


class DriverF:
    """
    Generator f(t, omega, y, z) of the backward equation.

    func(grid, k, y, z) is evaluated on all nodes of step k at once; y and z have
    shape (k + 1,) or (k + 1, ...) with per-node data along the first axis.
    """

    def __init__(
        self,
        kind: str,
        func: Callable,
        arguments: Tuple[str, ...] = ("y", "z"),
        params: Optional[dict] = None,
        envelope: Optional[Callable] = None,
    ):
        self.kind = kind
        self.func = func
        self.arguments = tuple(arguments)
        self.params = params or {}
        self.envelope = envelope

    def __repr__(self):
        return f"DriverF({self.kind!r}, {self.params})"

    @classmethod
    def from_config(cls, config: Optional[dict]) -> "DriverF":
        entry = catalog.generator_f(config)

        def func(grid, k, y, z):
            t, B = node_arguments(grid, k, np.broadcast(y, z).ndim)
            return entry.func(t, B, y, z)

        envelope = None
        if entry.envelope is not None:
            def envelope(grid, k, band):
                return entry.envelope(grid.time(k), grid.brownian(k), band)

        return cls(entry.kind, func, entry.arguments, entry.params, envelope)

    @classmethod
    def zero(cls) -> "DriverF":
        return cls.from_config({"kind": "zero"})

    @classmethod
    def from_callable(cls, fn: Callable, arguments: Tuple[str, ...] = ("y", "z"), kind: str = "custom") -> "DriverF":
        """Wrap fn(t, B, y, z) written against numpy arrays."""
        def func(grid, k, y, z):
            t, B = node_arguments(grid, k, np.broadcast(y, z).ndim)
            return fn(t, B, y, z)

        return cls(kind, func, arguments)

    def evaluate(self, grid: TimeGrid, k: int, y, z) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        shape = np.broadcast(y, z).shape
        with np.errstate(over="ignore", invalid="ignore"):
            return np.array(np.broadcast_to(self.func(grid, k, y, z), shape), dtype=float)

    def declared_envelopes(self, grid: TimeGrid, band: AdaptedField) -> Optional[Tuple[AdaptedField, AdaptedField]]:
        if self.envelope is None:
            return None
        pairs = [self.envelope(grid, k, band.step(k)) for k in range(grid.steps + 1)]
        eta = AdaptedField(grid, [np.asarray(p[0], dtype=float) for p in pairs], name="eta")
        C = AdaptedField(grid, [np.asarray(p[1], dtype=float) for p in pairs], name="C")
        if not (eta.is_finite() and C.is_finite()):
            return None
        return eta, C


class DriverG:
    """Generator g(t, omega, y) integrated against the clock A."""

    def __init__(
        self,
        kind: str,
        func: Callable,
        arguments: Tuple[str, ...] = ("y",),
        params: Optional[dict] = None,
        bound: Optional[Callable] = None,
    ):
        self.kind = kind
        self.func = func
        self.arguments = tuple(arguments)
        self.params = params or {}
        self.bound = bound

    def __repr__(self):
        return f"DriverG({self.kind!r}, {self.params})"

    @classmethod
    def from_config(cls, config: Optional[dict]) -> "DriverG":
        entry = catalog.generator_g(config)

        def func(grid, k, y):
            t, B = node_arguments(grid, k, np.ndim(y))
            return entry.func(t, B, y)

        bound = None
        if entry.envelope is not None:
            def bound(grid, k, band):
                return entry.envelope(grid.time(k), grid.brownian(k), band)

        return cls(entry.kind, func, entry.arguments, entry.params, bound)

    @classmethod
    def zero(cls) -> "DriverG":
        return cls.from_config({"kind": "zero"})

    @classmethod
    def from_callable(cls, fn: Callable, arguments: Tuple[str, ...] = ("y",), kind: str = "custom") -> "DriverG":
        def func(grid, k, y):
            t, B = node_arguments(grid, k, np.ndim(y))
            return fn(t, B, y)

        return cls(kind, func, arguments)

    def evaluate(self, grid: TimeGrid, k: int, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.array(np.broadcast_to(self.func(grid, k, y), y.shape), dtype=float)

    def declared_bound(self, grid: TimeGrid, band: AdaptedField) -> Optional[AdaptedField]:
        if self.bound is None:
            return None
        bound = AdaptedField.from_steps(
            grid, lambda k: np.asarray(self.bound(grid, k, band.step(k)), dtype=float), grid.steps - 1, "g bound"
        )
        return bound if bound.is_finite() else None


@dataclass(frozen=True)
class BarrierPair:
    lower: AdaptedField
    upper: AdaptedField
    shift: Optional[AdaptedField] = None


@dataclass(frozen=True)
class ClockAndForcing:
    """Increments of A and R = R+ - R- over [t_k, t_{k+1}], stored on steps 0..N-1."""
    dA: AdaptedField
    dR_plus: AdaptedField
    dR_minus: AdaptedField

    @classmethod
    def zero(cls, grid: TimeGrid) -> "ClockAndForcing":
        zeros = AdaptedField.zeros(grid, grid.steps - 1)
        return cls(zeros, zeros, zeros)

    @property
    def dR(self) -> AdaptedField:
        return self.dR_plus - self.dR_minus

    @property
    def dR_variation(self) -> AdaptedField:
        return self.dR_plus + self.dR_minus


@dataclass(frozen=True)
class Envelopes:
    """|f(t, y, z)| <= eta_t + C_t / 2 * |z|^2 on steps 0..N."""
    eta: AdaptedField
    C: AdaptedField


@dataclass(frozen=True)
class ProblemSpec:
    grid: TimeGrid
    f: DriverF
    g: DriverG
    barriers: BarrierPair
    terminal: np.ndarray
    clock: ClockAndForcing
    envelopes: Envelopes
    measure: BranchMeasure = BranchMeasure()
    name: str = ""

    @property
    def lower(self) -> AdaptedField:
        return self.barriers.lower

    @property
    def upper(self) -> AdaptedField:
        return self.barriers.upper

    def band(self) -> AdaptedField:
        """max(|L|, |U|) per node."""
        return self.lower.combine(self.upper, lambda a, b: np.maximum(np.abs(a), np.abs(b)), name="band")

    @classmethod
    def create(
        cls,
        grid: TimeGrid,
        terminal: FieldLike,
        lower: FieldLike = -np.inf,
        upper: FieldLike = np.inf,
        f: Optional[DriverF] = None,
        g: Optional[DriverG] = None,
        dA: FieldLike = 0.0,
        dR_plus: FieldLike = 0.0,
        dR_minus: FieldLike = 0.0,
        eta: Optional[FieldLike] = None,
        C: Optional[FieldLike] = None,
        shift: Optional[FieldLike] = None,
        measure: Optional[BranchMeasure] = None,
        name: str = "",
    ) -> "ProblemSpec":
        """
        Assemble an instance from numbers, arrays, node functions or fields.
        Clock and forcing arguments are increments per step, not densities.
        """
        f = f or DriverF.zero()
        g = g or DriverG.zero()
        barriers = BarrierPair(
            as_field(grid, lower, grid.steps, "L"),
            as_field(grid, upper, grid.steps, "U"),
            None if shift is None else as_field(grid, shift, grid.steps, "S"),
        )
        clock = ClockAndForcing(
            as_field(grid, dA, grid.steps - 1, "dA"),
            as_field(grid, dR_plus, grid.steps - 1, "dR+"),
            as_field(grid, dR_minus, grid.steps - 1, "dR-"),
        )
        if eta is None or C is None:
            declared = f.declared_envelopes(grid, barriers.lower.combine(
                barriers.upper, lambda a, b: np.maximum(np.abs(a), np.abs(b))))
            if declared is None:
                raise GBSDEConfigError(f"driver {f.kind!r} declares no envelopes; give eta and C")
            eta = declared[0] if eta is None else eta
            C = declared[1] if C is None else C
        envelopes = Envelopes(as_field(grid, eta, grid.steps, "eta"), as_field(grid, C, grid.steps, "C"))
        return cls(
            grid=grid,
            f=f,
            g=g,
            barriers=barriers,
            terminal=terminal_values(grid, terminal),
            clock=clock,
            envelopes=envelopes,
            measure=measure or BranchMeasure(),
            name=name,
        )


def as_field(grid: TimeGrid, value: FieldLike, final_step: int, name: str = "") -> AdaptedField:
    if isinstance(value, AdaptedField):
        return value if value.final_step == final_step else value.truncated(final_step)
    if isinstance(value, NodeFunction):
        return value.field(grid, final_step, name=name)
    if np.ndim(value) == 0:
        return AdaptedField.constant(grid, float(value), final_step, name)
    raise GBSDEConfigError(f"cannot build field {name!r} from {type(value).__name__}")


def terminal_values(grid: TimeGrid, value: FieldLike) -> np.ndarray:
    if isinstance(value, AdaptedField):
        values = value.step(grid.steps)
    elif isinstance(value, NodeFunction):
        values = value(grid.horizon, grid.brownian(grid.steps))
    else:
        values = np.broadcast_to(np.asarray(value, dtype=float), (grid.steps + 1,))
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


def _density_field(grid: TimeGrid, spec: Any, name: str) -> AdaptedField:
    """Clock and forcing are configured as densities: increment = density(t_k, B_k) * dt."""
    return catalog.node_function(spec).field(grid, grid.steps - 1, name=name) * grid.dt


def load_problem(source: Union[Path, str, dict], steps: Optional[int] = None) -> ProblemSpec:
    """
    Build a ProblemSpec from a configuration file or an already parsed mapping.

    :param source: Path / str of a JSON or YAML document, or a dict
    :param steps: int, overrides grid.N
    :return: ProblemSpec
    """
    config = source if isinstance(source, dict) else get_yaml_data(Path(source))
    try:
        grid_config = config["grid"]
        grid = TimeGrid(
            parse_real(grid_config.get("T", 1.0), "grid.T"),
            int(steps if steps is not None else grid_config["N"]),
        )
    except (KeyError, TypeError, ValueError) as ex:
        raise GBSDEConfigError(f"grid needs T and N: {ex}")

    barriers = config.get("barriers", {}) or {}
    clock = config.get("clock", {}) or {}
    envelopes = config.get("envelopes") or {}
    if "R" in clock and ("R_plus" in clock or "R_minus" in clock):
        raise GBSDEConfigError("give either clock.R or clock.R_plus / clock.R_minus")
    if "R" in clock:
        signed = _density_field(grid, clock["R"], "dR")
        dR_plus, dR_minus = signed.map(lambda v: np.maximum(v, 0.0)), signed.map(lambda v: np.maximum(-v, 0.0))
    else:
        dR_plus = _density_field(grid, clock.get("R_plus", 0.0), "dR+")
        dR_minus = _density_field(grid, clock.get("R_minus", 0.0), "dR-")
    if "terminal" not in config:
        raise GBSDEConfigError("configuration needs a terminal condition")

    measure_config = config.get("measure") or {}
    spec = ProblemSpec.create(
        grid,
        terminal=catalog.node_function(config["terminal"]),
        lower=catalog.node_function(barriers.get("L", "-inf")),
        upper=catalog.node_function(barriers.get("U", "inf")),
        f=DriverF.from_config(config.get("driver_f")),
        g=DriverG.from_config(config.get("driver_g")),
        dA=_density_field(grid, clock.get("A", 0.0), "dA"),
        dR_plus=dR_plus,
        dR_minus=dR_minus,
        eta=catalog.node_function(envelopes["eta"]) if "eta" in envelopes else None,
        C=catalog.node_function(envelopes["C"]) if "C" in envelopes else None,
        shift=catalog.node_function(barriers["S"]) if "S" in barriers else None,
        measure=BranchMeasure(parse_real(measure_config.get("q", 0.5), "measure.q")),
        name=str(config.get("name", "")),
    )
    if (config.get("driver_g") or {}).get("normalize"):
        spec = normalize_g(spec)

    report = validate_structure(spec)
    if not report.passed:
        raise GBSDEConfigError(f"invalid problem instance: {'; '.join(report.violations)}")
    logger.info(f"Loaded problem {spec.name!r} with {grid.steps} steps on [0, {grid.horizon}]")
    return spec


@dataclass
class AssumptionReport:
    name: str
    passed: bool = True
    worst: float = 0.0
    location: Dict[str, Any] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)
    checked: int = 0
    details: Dict[str, Any] = field(default_factory=dict)

    def record(self, check: str, magnitude: float, tolerance: float = 0.0, **where) -> bool:
        """Register one tested quantity; magnitude > tolerance is a violation."""
        self.checked += 1
        if not magnitude > tolerance:
            return False
        self.passed = False
        if not self.location or magnitude > self.worst:
            self.worst = float(magnitude)
            self.location = dict(check=check, **where)
        if len(self.violations) < MAX_REPORTED_VIOLATIONS:
            message = f"{check} violated by {magnitude:.3e} at {where}"
            self.violations.append(message)
            logger.warning(f"{self.name}: {message}")
        return True

    def record_array(self, check: str, excess: np.ndarray, k: int, tolerance=0.0, **context) -> bool:
        """Record the worst entry of a per-node (k + 1, ...) excess array."""
        excess = np.asarray(excess, dtype=float)
        tolerance = np.broadcast_to(np.asarray(tolerance, dtype=float), excess.shape)
        self.checked += excess.size - 1
        margin = np.where(np.isnan(excess), np.inf, excess - tolerance)
        index = np.unravel_index(int(np.argmax(margin)), excess.shape)
        worst = np.inf if np.isnan(excess[index]) else float(excess[index])
        extra = {key: float(np.asarray(value)[index]) for key, value in context.items()}
        return self.record(check, worst, float(tolerance[index]), step=k, level=int(index[0]), **extra)

    def merge(self, other: "AssumptionReport") -> "AssumptionReport":
        self.checked += other.checked
        for message in other.violations:
            if len(self.violations) < MAX_REPORTED_VIOLATIONS:
                self.violations.append(message)
        if not other.passed:
            self.passed = False
            if not self.location or other.worst > self.worst:
                self.worst = other.worst
                self.location = other.location
        self.details.update(other.details)
        return self

    def summary(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst": self.worst,
            "location": self.location,
            "checked": self.checked,
            "violations": self.violations,
            "details": self.details,
        }


def _sample_y(spec: ProblemSpec, k: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples in [L, U] per node; infinite sides are cut at VALIDATION_Y_RANGE."""
    L, U = spec.lower.step(k), spec.upper.step(k)
    low = np.where(np.isfinite(L), L, np.minimum(U, 0.0) - VALIDATION_Y_RANGE)
    high = np.where(np.isfinite(U), U, np.maximum(L, 0.0) + VALIDATION_Y_RANGE)
    u = rng.uniform(size=(k + 1, samples))
    return low[:, None] + (high - low)[:, None] * u


def _z_grid(k: int, samples: int) -> np.ndarray:
    return np.broadcast_to(np.linspace(-VALIDATION_Z_RANGE, VALIDATION_Z_RANGE, samples), (k + 1, samples))


def validate_A1_A2(spec: ProblemSpec, samples: int = VALIDATION_SAMPLES, seed: int = 0) -> AssumptionReport:
    """
    Sampled check of |f| <= eta + C/2 |z|^2 and |g| <= 1 with y uniform in [L, U]
    and z on a regular grid, on every node of steps 0..N-1.
    """
    if samples < 1:
        raise GBSDEConfigError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    grid = spec.grid
    report = AssumptionReport("growth envelopes")
    for k in range(grid.steps):
        y = _sample_y(spec, k, samples, rng)
        z = _z_grid(k, samples)
        bound = column(spec.envelopes.eta.step(k), 2) + column(spec.envelopes.C.step(k), 2) / 2.0 * z ** 2
        f = spec.f.evaluate(grid, k, y, z)
        report.record_array("f envelope", np.abs(f) - bound, k, 1e-12 * (1.0 + bound), y=y, z=z)
        g = spec.g.evaluate(grid, k, y)
        report.record_array("g bound", np.abs(g) - 1.0, k, 1e-12, y=y)
    logger.debug(f"Growth envelopes checked {report.checked} samples, passed={report.passed}")
    return report


def validate_structure(spec: ProblemSpec) -> AssumptionReport:
    grid = spec.grid
    report = AssumptionReport("structure")
    checks = (
        (spec.lower, grid.steps), (spec.upper, grid.steps),
        (spec.clock.dA, grid.steps - 1), (spec.clock.dR_plus, grid.steps - 1),
        (spec.clock.dR_minus, grid.steps - 1), (spec.envelopes.eta, grid.steps), (spec.envelopes.C, grid.steps),
    )
    for item, final_step in checks:
        if item.final_step != final_step:
            report.record(f"{item.name} defined up to step {final_step}", np.inf, step=item.final_step)
    if not report.passed:
        return report
    if spec.terminal.shape != (grid.steps + 1,) or not np.all(np.isfinite(spec.terminal)):
        report.record("finite terminal value", np.inf, step=grid.steps)
        return report
    for k in range(grid.steps + 1):
        L, U = spec.lower.step(k), spec.upper.step(k)
        with np.errstate(invalid="ignore"):
            report.record_array("L <= U", np.where(L > U, np.inf, 0.0), k)
        report.record_array("eta >= 0", -spec.envelopes.eta.step(k), k)
        report.record_array("C >= 0", -spec.envelopes.C.step(k), k)
        if k < grid.steps:
            report.record_array("dA >= 0", -spec.clock.dA.step(k), k)
            report.record_array("dR+ >= 0", -spec.clock.dR_plus.step(k), k)
            report.record_array("dR- >= 0", -spec.clock.dR_minus.step(k), k)
    xi = spec.terminal
    report.record_array("L_T <= xi", spec.lower.step(grid.steps) - xi, grid.steps)
    report.record_array("xi <= U_T", xi - spec.upper.step(grid.steps), grid.steps)
    return report


def validate_A3_A4(spec: ProblemSpec) -> AssumptionReport:
    """L <= S <= U when S is given, and L <= 0 <= U."""
    grid = spec.grid
    report = AssumptionReport("barrier structure")
    a3 = AssumptionReport("shift between barriers")
    a4 = AssumptionReport("zero between barriers")
    S = spec.barriers.shift
    for k in range(grid.steps + 1):
        L, U = spec.lower.step(k), spec.upper.step(k)
        if S is not None:
            a3.record_array("L <= S", L - S.step(k), k)
            a3.record_array("S <= U", S.step(k) - U, k)
        a4.record_array("L <= 0", L, k)
        a4.record_array("0 <= U", -U, k)
    report.merge(a3).merge(a4)
    report.details.update({
        "shift between barriers": None if S is None else a3.passed,
        "zero between barriers": a4.passed,
    })
    return report


def shift_decomposition(spec: ProblemSpec) -> Tuple[AdaptedField, AdaptedField]:
    """
    Discrete Doob decomposition of the shift S: dV_k = E[S_{k+1} | F_k] - S_k
    and alpha_k with S_{k+1} = E[S_{k+1} | F_k] + alpha_k * dW_k.
    """
    S = spec.barriers.shift
    if S is None:
        raise GBSDEAssumptionError("no shift process given")
    grid = spec.grid
    dV = AdaptedField.from_steps(
        grid, lambda k: expect_step(S.step(k + 1), grid, k, spec.measure) - S.step(k), grid.steps - 1, "dV"
    )
    alpha = AdaptedField.from_steps(
        grid, lambda k: martingale_rep_step(S.step(k + 1), grid), grid.steps - 1, "alpha"
    )
    return dV, alpha


def shift_by_S(spec: ProblemSpec) -> ProblemSpec:
    """
    Recentre the instance at S: barriers L - S and U - S, terminal xi - S_T and forcing
    R + V where V is the finite variation part of S. Solving the result and adding S
    back reproduces the solution of spec; Z moves by the integrand alpha of S.
    """
    S = spec.barriers.shift
    if S is None:
        if validate_A3_A4(spec).details["zero between barriers"]:
            return spec
        raise GBSDEAssumptionError("no admissible shift: L <= 0 <= U fails and no S is given")

    grid = spec.grid
    dV, alpha = shift_decomposition(spec)
    alpha_full = AdaptedField(grid, list(alpha.steps()) + [np.zeros(grid.steps + 1)], name="alpha")
    base_f, base_g = spec.f, spec.g

    def shifted_f(grid, k, y, z):
        ndim = np.broadcast(y, z).ndim
        return base_f.evaluate(grid, k, y + column(S.step(k), ndim), z + column(alpha_full.step(k), ndim))

    def shifted_g(grid, k, y):
        return base_g.evaluate(grid, k, y + column(S.step(k), np.ndim(y)))

    eta, C = spec.envelopes.eta, spec.envelopes.C
    shifted = replace(
        spec,
        f=DriverF("shifted", shifted_f, base_f.arguments, {"base": base_f.kind}),
        g=DriverG("shifted", shifted_g, base_g.arguments, {"base": base_g.kind}),
        barriers=BarrierPair(spec.lower - S, spec.upper - S, None),
        terminal=terminal_values(grid, spec.terminal - S.step(grid.steps)),
        clock=ClockAndForcing(
            spec.clock.dA,
            spec.clock.dR_plus + dV.map(lambda v: np.maximum(v, 0.0)),
            spec.clock.dR_minus + dV.map(lambda v: np.maximum(-v, 0.0)),
        ),
        # |f(y + S, z + alpha)| <= eta + C alpha^2 + C |z|^2
        envelopes=Envelopes(eta + C * alpha_full * alpha_full, C * 2.0),
        name=f"{spec.name} shifted".strip(),
    )
    logger.debug(f"Shifted {spec.name!r} by S, max |dV| = {dV.max_abs():.3e}")
    return shifted


def unshift_solution(spec: ProblemSpec, solution):
    """Add S back to a solution of shift_by_S(spec)."""
    S = spec.barriers.shift
    if S is None:
        return solution
    _, alpha = shift_decomposition(spec)
    return replace(solution, Y=solution.Y + S, Z=solution.Z + alpha)


def normalize_g(spec: ProblemSpec, bound: Optional[Union[float, AdaptedField]] = None) -> ProblemSpec:
    """Replace g by g / (1 + bound) and dA by (1 + bound) dA; g dA is unchanged."""
    grid = spec.grid
    if bound is None:
        bound = spec.g.declared_bound(grid, spec.band())
        if bound is None:
            raise GBSDEConfigError(f"driver_g {spec.g.kind!r} declares no bound on [L, U]")
    bound = as_field(grid, bound, grid.steps - 1, "g bound")
    scale = bound + 1.0
    base_g = spec.g

    def normalized(grid, k, y):
        return base_g.evaluate(grid, k, y) / column(scale.step(k), np.ndim(y))

    def normalized_bound(grid, k, band):
        return bound.step(k) / scale.step(k)

    return replace(
        spec,
        g=DriverG("normalized", normalized, base_g.arguments, {"base": base_g.kind}, normalized_bound),
        clock=replace(spec.clock, dA=spec.clock.dA * scale),
    )


def validate_H(spec: ProblemSpec, samples: int = VALIDATION_SAMPLES, seed: int = 0) -> AssumptionReport:
    """
    Assumptions of the transformed setting: dR >= 0, -eta - C/2|z|^2 <= f <= 0,
    -1 <= g <= 0, 0 < L <= U < 1 and a deterministic nonincreasing process
    between the barriers, tried with S_k = min over i <= k and all nodes of U_i.
    """
    grid = spec.grid
    rng = np.random.default_rng(seed)
    report = AssumptionReport("transformed setting")
    witness = np.minimum.accumulate([float(np.min(spec.upper.step(k))) for k in range(grid.steps + 1)])
    for k in range(grid.steps + 1):
        L, U = spec.lower.step(k), spec.upper.step(k)
        report.record_array("L > 0", np.where(L > 0.0, 0.0, np.inf), k)
        report.record_array("U < 1", np.where(U < 1.0, 0.0, np.inf), k)
        report.record_array("L <= U", L - U, k)
        report.record_array("L <= witness", L - witness[k], k)
        if k == grid.steps:
            break
        report.record_array("dR >= 0", -spec.clock.dR.step(k), k, 1e-15)
        y = _sample_y(spec, k, samples, rng)
        z = _z_grid(k, samples)
        f = spec.f.evaluate(grid, k, y, z)
        floor = -column(spec.envelopes.eta.step(k), 2) - column(spec.envelopes.C.step(k), 2) / 2.0 * z ** 2
        report.record_array("f <= 0", f, k, 1e-12, y=y, z=z)
        report.record_array("f >= floor", floor - f, k, 1e-12 * (1.0 - floor), y=y, z=z)
        g = spec.g.evaluate(grid, k, y)
        report.record_array("g <= 0", g, k, 1e-12, y=y)
        report.record_array("g >= -1", -1.0 - g, k, 1e-12, y=y)
    report.details["witness"] = witness.tolist()
    return report


def validate_C(spec: ProblemSpec, samples: int = VALIDATION_SAMPLES, seed: int = 0) -> AssumptionReport:
    """
    Strong assumptions: sampled Lipschitz constants of f and g with -C2 <= f <= 0
    and -1 <= g <= 0, 0 < L <= U < 1, bounded A_T and |R|_T.
    """
    grid = spec.grid
    rng = np.random.default_rng(seed)
    report = AssumptionReport("strong assumptions")
    lip_f = lip_g = 0.0
    lowest_f = 0.0
    for k in range(grid.steps + 1):
        L, U = spec.lower.step(k), spec.upper.step(k)
        report.record_array("L > 0", np.where(L > 0.0, 0.0, np.inf), k)
        report.record_array("U < 1", np.where(U < 1.0, 0.0, np.inf), k)
        report.record_array("L <= U", L - U, k)
        if k == grid.steps:
            break
        y1, y2 = _sample_y(spec, k, samples, rng), _sample_y(spec, k, samples, rng)
        z1 = rng.uniform(-VALIDATION_Z_RANGE, VALIDATION_Z_RANGE, size=(k + 1, samples))
        z2 = rng.uniform(-VALIDATION_Z_RANGE, VALIDATION_Z_RANGE, size=(k + 1, samples))
        f1, f2 = spec.f.evaluate(grid, k, y1, z1), spec.f.evaluate(grid, k, y2, z2)
        g1, g2 = spec.g.evaluate(grid, k, y1), spec.g.evaluate(grid, k, y2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio_f = np.abs(f1 - f2) / (np.abs(y1 - y2) + np.abs(z1 - z2))
            ratio_g = np.abs(g1 - g2) / np.abs(y1 - y2)
        lip_f = max(lip_f, float(np.nanmax(np.append(ratio_f.ravel(), 0.0))))
        lip_g = max(lip_g, float(np.nanmax(np.append(ratio_g.ravel(), 0.0))))
        lowest_f = min(lowest_f, float(np.min(f1)), float(np.min(f2)))
        report.record_array("f <= 0", f1, k, 1e-12, y=y1, z=z1)
        report.record_array("g <= 0", g1, k, 1e-12, y=y1)
        report.record_array("g >= -1", -1.0 - g1, k, 1e-12, y=y1)
    A_T = cumulative_extremes(spec.clock.dA)[0].step(grid.steps).max()
    R_T = cumulative_extremes(spec.clock.dR_variation)[0].step(grid.steps).max()
    report.record("finite Lipschitz constant of f", 0.0 if np.isfinite(lip_f) else np.inf)
    report.record("finite Lipschitz constant of g", 0.0 if np.isfinite(lip_g) else np.inf)
    report.record("A_T bounded", 0.0 if np.isfinite(A_T) else np.inf)
    report.record("|R|_T bounded", 0.0 if np.isfinite(R_T) else np.inf)
    report.details.update({
        "f lipschitz": lip_f, "C2": -lowest_f, "g lipschitz": lip_g,
        "A_T": float(A_T), "|R|_T": float(R_T),
    })
    return report
