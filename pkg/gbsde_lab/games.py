# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

"""
Dynkin games and game (cancellable American) options on the lattice.

The value of a game is the solution of the zero-generator doubly reflected equation
with barriers F(L), F(U) and terminal F(xi); the saddle rules stop where the value
touches a barrier. A game option is the same equation under the risk-neutral measure
with discounted payoffs.
"""

import logging

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Set, Tuple, Union

import numpy as np

from gbsde_lab.constants import ENUMERATION_NODE_LIMIT, RESIDUAL_TOL, SADDLE_MAX_DEPTH
from gbsde_lab.engines import catalog, oracles
from gbsde_lab.engines.catalog import NodeFunction
from gbsde_lab.exceptions import GBSDEArbitrageError, GBSDEConfigError, GBSDECountExceeded
from gbsde_lab.lattice import (
    AdaptedField,
    BranchMeasure,
    StoppingRule,
    TimeGrid,
    enumerate_paths,
    enumerate_stopping_rules,
    path_levels,
)
from gbsde_lab.problem import ProblemSpec, as_field, terminal_values
from gbsde_lab.solver import LatticeSolution, SolverConfig, solve
from gbsde_lab.utils import get_yaml_data, parse_real

logger = logging.getLogger(__name__)

SADDLE_TOL = 1e-12
ORDER_TOL = 1e-14

FieldLike = Union[float, AdaptedField, NodeFunction]


class Utility:
    """Nondecreasing continuous F applied to the game payoff."""

    def __init__(self, kind: str, func: Callable, params: Optional[dict] = None):
        self.kind = kind
        self.func = func
        self.params = params or {}

    def __repr__(self):
        return f"Utility({self.kind!r}, {self.params})"

    def __call__(self, x):
        return self.func(x)

    @classmethod
    def from_config(cls, config: Any = None) -> "Utility":
        kind, params, func = catalog.utility_function(config)
        return cls(kind, func, params)

    @classmethod
    def identity(cls) -> "Utility":
        return cls.from_config({"kind": "identity"})

    def field(self, values: AdaptedField) -> AdaptedField:
        return values.map(self.func, name=f"F({values.name})")


@dataclass(frozen=True)
class DynkinGameSpec:
    """
    The minimizer pays U when stopping first, the maximizer receives L when stopping
    first, Q is paid on simultaneous stops before the horizon and xi at the horizon.
    """
    grid: TimeGrid
    lower: AdaptedField
    upper: AdaptedField
    tie: AdaptedField
    terminal: np.ndarray
    utility: Utility = field(default_factory=Utility.identity)
    measure: BranchMeasure = BranchMeasure()
    name: str = ""

    def __post_init__(self):
        for k in range(self.grid.steps + 1):
            L, U, Q = self.lower.step(k), self.upper.step(k), self.tie.step(k)
            if np.any(L - Q > ORDER_TOL) or np.any(Q - U > ORDER_TOL):
                raise GBSDEConfigError(f"game needs L <= Q <= U, violated at step {k}")
        L_T, U_T = self.lower.step(self.grid.steps), self.upper.step(self.grid.steps)
        if np.any(self.terminal < L_T) or np.any(self.terminal > U_T):
            raise GBSDEConfigError("game terminal payoff outside [L_T, U_T]")

    @classmethod
    def create(
        cls,
        grid: TimeGrid,
        lower: FieldLike,
        upper: FieldLike,
        terminal: FieldLike,
        tie: Optional[FieldLike] = None,
        utility: Optional[Utility] = None,
        measure: Optional[BranchMeasure] = None,
        name: str = "",
    ) -> "DynkinGameSpec":
        lower = as_field(grid, lower, grid.steps, "L")
        return cls(
            grid=grid,
            lower=lower,
            upper=as_field(grid, upper, grid.steps, "U"),
            tie=lower if tie is None else as_field(grid, tie, grid.steps, "Q"),
            terminal=terminal_values(grid, terminal),
            utility=utility or Utility.identity(),
            measure=measure or BranchMeasure(),
            name=name,
        )

    def utility_fields(self) -> Tuple[AdaptedField, AdaptedField, AdaptedField, np.ndarray]:
        """F(L), F(U), F(Q) and F(xi)."""
        F = self.utility
        return F.field(self.lower), F.field(self.upper), F.field(self.tie), np.asarray(F(self.terminal), dtype=float)


def load_game(source: Union[Path, str, dict], steps: Optional[int] = None) -> DynkinGameSpec:
    """Keys: grid {T, N}, barriers {L, U, Q}, terminal, utility {kind, params}, measure {q}, name."""
    config = source if isinstance(source, dict) else get_yaml_data(Path(source))
    try:
        grid = TimeGrid(
            parse_real(config["grid"].get("T", 1.0), "grid.T"),
            int(steps if steps is not None else config["grid"]["N"]),
        )
    except (KeyError, TypeError, ValueError) as ex:
        raise GBSDEConfigError(f"grid needs T and N: {ex}")
    barriers = config.get("barriers", {}) or {}
    if "L" not in barriers or "U" not in barriers or "terminal" not in config:
        raise GBSDEConfigError("a game needs barriers.L, barriers.U and terminal")
    measure_config = config.get("measure") or {}
    game = DynkinGameSpec.create(
        grid,
        lower=catalog.node_function(barriers["L"]),
        upper=catalog.node_function(barriers["U"]),
        terminal=catalog.node_function(config["terminal"]),
        tie=catalog.node_function(barriers["Q"]) if "Q" in barriers else None,
        utility=Utility.from_config(config.get("utility")),
        measure=BranchMeasure(parse_real(measure_config.get("q", 0.5), "measure.q")),
        name=str(config.get("name", "")),
    )
    logger.info(f"Loaded game {game.name!r} with {grid.steps} steps")
    return game


def evaluate_payoff(
    game: DynkinGameSpec, rule_min: StoppingRule, rule_max: StoppingRule, path
) -> float:
    """F(J(lambda, sigma)) on one path, lambda from rule_min and sigma from rule_max."""
    path = np.asarray(path, dtype=int)
    levels = path_levels(path)[0]
    stop_min, stop_max = rule_min.stop_step(path), rule_max.stop_step(path)
    F_L, F_U, F_Q, F_xi = game.utility_fields()
    if stop_min < stop_max:
        return F_U[stop_min][levels[stop_min]]
    if stop_max < stop_min:
        return F_L[stop_max][levels[stop_max]]
    if stop_max < game.grid.steps:
        return F_Q[stop_max][levels[stop_max]]
    return float(F_xi[levels[-1]])


@dataclass(frozen=True)
class DynkinValue:
    """Value field and the stopping regions {Y = F(U)} of the minimizer and {Y = F(L)} of the maximizer."""
    value: AdaptedField
    solution: LatticeSolution
    stop_min: AdaptedField
    stop_max: AdaptedField

    @property
    def root(self) -> float:
        return self.value[0][0]

    @property
    def minimizer(self) -> StoppingRule:
        return StoppingRule.from_nodes(self.value.grid, lambda k, j: bool(self.stop_min[k][j]))

    @property
    def maximizer(self) -> StoppingRule:
        return StoppingRule.from_nodes(self.value.grid, lambda k, j: bool(self.stop_max[k][j]))

    def regions(self) -> Dict[str, Set[Tuple[int, int]]]:
        return {
            "minimizer": {(k, j) for k, j, flag in self.stop_min.rows() if flag},
            "maximizer": {(k, j) for k, j, flag in self.stop_max.rows() if flag},
        }


def _stopping_regions(Y: AdaptedField, lower: AdaptedField, upper: AdaptedField) -> Tuple[AdaptedField, AdaptedField]:
    last = Y.grid.steps - 1
    stop_min = AdaptedField.from_steps(
        Y.grid, lambda k: (Y.step(k) == upper.step(k)).astype(float), last, "lambda*"
    )
    stop_max = AdaptedField.from_steps(
        Y.grid, lambda k: (Y.step(k) == lower.step(k)).astype(float), last, "sigma*"
    )
    return stop_min, stop_max


def dynkin_value(game: DynkinGameSpec, config: Optional[SolverConfig] = None) -> DynkinValue:
    F_L, F_U, _, F_xi = game.utility_fields()
    spec = ProblemSpec.create(
        game.grid, terminal=F_xi, lower=F_L, upper=F_U, eta=0.0, C=0.0, measure=game.measure,
        name=f"{game.name} game".strip(),
    )
    solution = solve(spec, config)
    stop_min, stop_max = _stopping_regions(solution.Y, F_L, F_U)
    logger.info(f"Game value {solution.root:.12g}")
    return DynkinValue(solution.Y, solution, stop_min, stop_max)


def rule_sets(game: DynkinGameSpec, config: Optional[SolverConfig] = None) -> Dict[str, Set[Tuple[int, int]]]:
    """Node sets of the saddle rules; invariant under increasing affine changes of F."""
    return dynkin_value(game, config).regions()


@dataclass
class SaddleReport:
    passed: bool
    value: float
    saddle_value: float
    sup_inf: float
    inf_sup: float
    worst: float = 0.0
    rules: int = 0
    counterexample: Dict[str, Any] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "value": self.value,
            "saddle_value": self.saddle_value,
            "sup_inf": self.sup_inf,
            "inf_sup": self.inf_sup,
            "worst": self.worst,
            "rules": self.rules,
            "counterexample": self.counterexample,
            "violations": self.violations,
        }


def _check_depth(grid: TimeGrid):
    if grid.steps > SADDLE_MAX_DEPTH or 2 ** grid.steps - 1 > ENUMERATION_NODE_LIMIT:
        raise GBSDECountExceeded(
            f"enumeration too large: {grid.steps} steps, saddle enumeration stops at {SADDLE_MAX_DEPTH}"
        )


def _game_paths(game: DynkinGameSpec):
    F_L, F_U, F_Q, F_xi = game.utility_fields()
    paths = enumerate_paths(game.grid.steps)
    levels = path_levels(paths)
    fields = (F_L.along(levels), F_U.along(levels), F_Q.along(levels), F_xi[levels[:, -1]])
    return paths, game.measure.path_probabilities(game.grid, paths), fields


def enumeration_value(game: DynkinGameSpec) -> Tuple[float, float]:
    """(sup-inf, inf-sup) of E[F(J)] over all pairs of stopping rules."""
    _check_depth(game.grid)
    rules = enumerate_stopping_rules(game.grid)
    paths, probabilities, fields = _game_paths(game)
    stops = oracles.stop_matrix(rules, paths)
    return oracles.sup_inf(oracles.expected_payoffs(oracles.payoff_tensor(*fields, stops, stops), probabilities))


def saddle_check(
    game: DynkinGameSpec, config: Optional[SolverConfig] = None, tolerance: float = SADDLE_TOL
) -> SaddleReport:
    """
    Enumerate every pair of stopping rules and check
    E[F(J(lambda*, sigma))] <= Y_0 <= E[F(J(lambda, sigma*))], E[F(J(lambda*, sigma*))] = Y_0
    and sup-inf = inf-sup = Y_0.
    """
    _check_depth(game.grid)
    result = dynkin_value(game, config)
    rules = enumerate_stopping_rules(game.grid)
    paths, probabilities, fields = _game_paths(game)
    stops = oracles.stop_matrix(rules, paths)
    saddle_min = oracles.stop_matrix([result.minimizer], paths)
    saddle_max = oracles.stop_matrix([result.maximizer], paths)

    expected = oracles.expected_payoffs(oracles.payoff_tensor(*fields, stops, stops), probabilities)
    against_min = oracles.expected_payoffs(oracles.payoff_tensor(*fields, saddle_min, stops), probabilities)[0]
    against_max = oracles.expected_payoffs(oracles.payoff_tensor(*fields, stops, saddle_max), probabilities)[:, 0]
    saddle_value = float(
        oracles.expected_payoffs(oracles.payoff_tensor(*fields, saddle_min, saddle_max), probabilities)[0, 0]
    )
    best_lower, best_upper = oracles.sup_inf(expected)
    value = result.root
    report = SaddleReport(True, value, saddle_value, best_lower, best_upper, rules=len(rules))

    def check(name: str, magnitude: float, **where):
        if magnitude > tolerance:
            report.passed = False
            report.violations.append(f"{name} violated by {magnitude:.3e}")
            logger.warning(f"saddle check: {name} violated by {magnitude:.3e} at {where}")
            if magnitude > report.worst:
                report.worst = magnitude
                report.counterexample = dict(check=name, **where)

    j = int(np.argmax(against_min))
    check("E[J(lambda*, sigma)] <= Y0", float(against_min[j] - value), maximizer=list(rules[j].flags))
    i = int(np.argmin(against_max))
    check("Y0 <= E[J(lambda, sigma*)]", float(value - against_max[i]), minimizer=list(rules[i].flags))
    check("E[J(lambda*, sigma*)] = Y0", abs(saddle_value - value))
    check("sup inf = Y0", abs(best_lower - value))
    check("inf sup = Y0", abs(best_upper - value))
    logger.info(f"Saddle check over {len(rules)} x {len(rules)} rule pairs: passed={report.passed}")
    return report


def random_game(seed: int, steps: int = SADDLE_MAX_DEPTH, utility: Optional[Utility] = None) -> DynkinGameSpec:
    """Random node-valued barriers with L <= Q <= U and a terminal payoff in [L_T, U_T]."""
    rng = np.random.default_rng(seed)
    grid = TimeGrid(1.0, steps)
    lower = AdaptedField.from_steps(grid, lambda k: rng.uniform(-1.0, 0.5, k + 1), name="L")
    width = AdaptedField.from_steps(grid, lambda k: rng.uniform(0.0, 1.0, k + 1))
    share = AdaptedField.from_steps(grid, lambda k: rng.uniform(0.0, 1.0, k + 1))
    upper = lower + width
    tie = lower + width * share
    terminal = lower.step(steps) + width.step(steps) * rng.uniform(0.0, 1.0, steps + 1)
    return DynkinGameSpec.create(
        grid, lower, upper, np.minimum(terminal, upper.step(steps)), tie=tie, utility=utility,
        measure=BranchMeasure(float(rng.uniform(0.2, 0.8))), name=f"random game {seed}",
    )


@dataclass(frozen=True)
class MarketModel:
    """
    Binomial stock S_{k+1} = S_k u or S_k d and bond S0_k = exp(r t_k).
    Without explicit factors u = exp(delta sqrt(dt)) and d = 1 / u.
    """
    spot: float
    rate: float = 0.0
    drift: float = 0.0
    volatility: float = 0.2
    horizon: float = 1.0
    steps: int = 1
    up: Optional[float] = None
    down: Optional[float] = None

    def __post_init__(self):
        if not self.spot > 0.0:
            raise GBSDEConfigError(f"spot must be positive, got {self.spot}")
        if self.up is None or self.down is None:
            if not self.volatility > 0.0:
                raise GBSDEConfigError(f"volatility must be positive, got {self.volatility}")
            factor = float(np.exp(self.volatility * np.sqrt(self.horizon / self.steps)))
            object.__setattr__(self, "up", factor)
            object.__setattr__(self, "down", 1.0 / factor)
        if not self.up > self.down > 0.0:
            raise GBSDEConfigError(f"need u > d > 0, got u={self.up}, d={self.down}")
        q = self.risk_neutral_probability
        if not 0.0 < q < 1.0:
            raise GBSDEArbitrageError(
                f"arbitrage in lattice parameters: q* = {q:.6g} for u={self.up}, d={self.down}, r={self.rate}"
            )

    @classmethod
    def from_config(cls, config: dict, steps: Optional[int] = None) -> "MarketModel":
        try:
            return cls(
                spot=parse_real(config["S0"], "market.S0"),
                rate=parse_real(config.get("r", 0.0), "market.r"),
                drift=parse_real(config.get("b", 0.0), "market.b"),
                volatility=parse_real(config.get("delta", 0.2), "market.delta"),
                horizon=parse_real(config.get("T", 1.0), "market.T"),
                steps=int(steps if steps is not None else config.get("N", 1)),
                up=parse_real(config["u"], "market.u") if "u" in config else None,
                down=parse_real(config["d"], "market.d") if "d" in config else None,
            )
        except (KeyError, TypeError) as ex:
            raise GBSDEConfigError(f"market needs S0: {ex}")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.horizon, self.steps)

    @property
    def risk_neutral_probability(self) -> float:
        return float((np.exp(self.rate * self.grid.dt) - self.down) / (self.up - self.down))

    def risk_neutral_measure(self) -> BranchMeasure:
        return BranchMeasure(self.risk_neutral_probability)

    def physical_measure(self) -> BranchMeasure:
        q = float((np.exp(self.drift * self.grid.dt) - self.down) / (self.up - self.down))
        if not 0.0 < q < 1.0:
            raise GBSDEConfigError(f"drift b={self.drift} is not reachable with u={self.up}, d={self.down}")
        return BranchMeasure(q)

    def stock_field(self) -> AdaptedField:
        return AdaptedField(self.grid, oracles.stock_tree(self.spot, self.up, self.down, self.steps), name="S")

    def bond(self) -> np.ndarray:
        return np.exp(self.rate * self.grid.times)

    def field(self, value: FieldLike, name: str) -> AdaptedField:
        if isinstance(value, NodeFunction):
            return value.field(self.grid, self.steps, stock=self.stock_field(), name=name)
        return as_field(self.grid, value, self.steps, name)


@dataclass(frozen=True)
class HedgePortfolio:
    """Stock holdings gamma and bond holdings beta over [t_k, t_{k+1}], frozen from the cancellation node on."""
    stock: AdaptedField
    bond: AdaptedField
    cancel: AdaptedField


@dataclass(frozen=True)
class GameOptionPrice:
    market: MarketModel
    lower: AdaptedField
    upper: AdaptedField
    tie: AdaptedField
    terminal: np.ndarray
    value: AdaptedField
    solution: LatticeSolution
    cancel: AdaptedField
    exercise: AdaptedField
    hedge: HedgePortfolio

    @property
    def price(self) -> float:
        return self.value[0][0]

    @property
    def cancel_rule(self) -> StoppingRule:
        return StoppingRule.from_nodes(self.market.grid, lambda k, j: bool(self.cancel[k][j]))

    def rows(self):
        """(step, level, S, V, gamma, beta, cancel)."""
        stock = self.market.stock_field()
        for k, j, v in self.value.rows():
            if k < self.market.steps:
                yield k, j, stock[k][j], v, self.hedge.stock[k][j], self.hedge.bond[k][j], bool(self.cancel[k][j])
            else:
                yield k, j, stock[k][j], v, None, None, None


def price_game_option(
    market: MarketModel,
    lower: FieldLike,
    upper: FieldLike,
    tie: Optional[FieldLike] = None,
    terminal: Optional[FieldLike] = None,
    config: Optional[SolverConfig] = None,
) -> GameOptionPrice:
    """
    Price the option paying L on exercise, U on cancellation, Q on simultaneous
    action and xi (default L_T) at the horizon: solve the zero-generator equation for
    the discounted payoffs under q*, V = exp(rt) Y, and hedge with gamma = Z / sigma
    where sigma is the martingale integrand of the discounted stock.
    """
    grid = market.grid
    L, U = market.field(lower, "L"), market.field(upper, "U")
    Q = L if tie is None else market.field(tie, "Q")
    xi = L.step(grid.steps) if terminal is None else market.field(terminal, "xi").step(grid.steps)
    if L.min() < 0.0:
        raise GBSDEConfigError("game option payoffs need L >= 0")
    for k in range(grid.steps + 1):
        if np.any(L.step(k) > U.step(k)) or np.any(Q.step(k) < L.step(k)) or np.any(Q.step(k) > U.step(k)):
            raise GBSDEConfigError(f"game option needs L <= Q <= U, violated at step {k}")

    discount = np.exp(-market.rate * grid.times)
    discounted_L = L.map_steps(lambda k, v: discount[k] * v, "L~")
    discounted_U = U.map_steps(lambda k, v: discount[k] * v, "U~")
    measure = market.risk_neutral_measure()
    spec = ProblemSpec.create(
        grid, terminal=discount[-1] * np.asarray(xi, dtype=float), lower=discounted_L, upper=discounted_U,
        eta=0.0, C=0.0, measure=measure, name="game option",
    )
    solution = solve(spec, config)
    cancel, exercise = _stopping_regions(solution.Y, discounted_L, discounted_U)
    value = solution.Y.map_steps(lambda k, v: v / discount[k], "V")

    stock = market.stock_field()
    discounted_stock = stock.map_steps(lambda k, v: discount[k] * v)
    sigma = AdaptedField.from_steps(
        grid,
        lambda k: (discounted_stock.step(k + 1)[1:] - discounted_stock.step(k + 1)[:-1]) / (2.0 * grid.sqrt_dt),
        grid.steps - 1,
    )
    gamma = AdaptedField.from_steps(
        grid,
        lambda k: np.where(cancel.step(k) > 0.0, 0.0, solution.Z.step(k) / sigma.step(k)),
        grid.steps - 1,
        "gamma",
    )
    bond = market.bond()
    beta = AdaptedField.from_steps(
        grid,
        lambda k: (value.step(k) - gamma.step(k) * stock.step(k)) / bond[k],
        grid.steps - 1,
        "beta",
    )
    logger.info(f"Game option price {value[0][0]:.12g} with q* = {market.risk_neutral_probability:.6g}")
    return GameOptionPrice(
        market, L, U, Q, np.asarray(xi, dtype=float), value, solution, cancel, exercise,
        HedgePortfolio(gamma, beta, cancel),
    )


@dataclass
class HedgeReport:
    passed: bool = True
    self_financing: float = 0.0
    shortfall: float = 0.0
    enumeration_gap: Optional[float] = None
    paths: int = 0
    location: Dict[str, Any] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "self_financing": self.self_financing,
            "shortfall": self.shortfall,
            "enumeration_gap": self.enumeration_gap,
            "paths": self.paths,
            "location": self.location,
            "violations": self.violations,
        }

    def _flag(self, name: str, magnitude: float, **where):
        self.passed = False
        self.violations.append(f"{name} violated by {magnitude:.3e} at {where}")
        logger.warning(f"hedge: {name} violated by {magnitude:.3e} at {where}")
        if not self.location:
            self.location = dict(check=name, **where)


def verify_hedge(price: GameOptionPrice, tolerance: float = RESIDUAL_TOL) -> HedgeReport:
    """
    Run the portfolio on every path: X_0 = V_0, X_{k+1} = gamma_k S_{k+1} + beta_k S0_{k+1}
    until the cancellation step lambda*. Checks the self-financing identity on every step,
    X_{s ^ lambda*} >= J(s, lambda*) for every s and, on trees of depth at most 3, that V_0
    equals the value of the enumerated game.
    """
    market = price.market
    grid = market.grid
    stock = market.stock_field()
    bond = market.bond()
    paths = enumerate_paths(grid.steps)
    levels = path_levels(paths)
    report = HedgeReport(paths=len(paths))
    measure = market.risk_neutral_measure()
    discount = np.exp(-market.rate * grid.times)
    Z = price.solution.Z
    for p, path in enumerate(paths):
        nodes = levels[p]
        wealth = [price.price]
        cancel_step = grid.steps
        for k in range(grid.steps):
            j, following = nodes[k], nodes[k + 1]
            if price.cancel[k][j]:
                cancel_step = k
                break
            gamma = price.hedge.stock[k][j]
            beta = (wealth[-1] - gamma * stock[k][j]) / bond[k]
            after = gamma * stock[k + 1][following] + beta * bond[k + 1]
            gain = gamma * (stock[k + 1][following] - stock[k][j]) + beta * (bond[k + 1] - bond[k])
            dw_up, dw_down = measure.increments(grid, k)
            dw = dw_up[j] if path[k] else dw_down[j]
            replication = discount[k + 1] * after - (discount[k] * wealth[-1] + Z[k][j] * dw)
            residual = max(abs(after - wealth[-1] - gain), abs(replication))
            report.self_financing = max(report.self_financing, residual)
            if residual > tolerance * (1.0 + abs(wealth[-1])):
                report._flag("self-financing", residual, path=path.tolist(), step=k)
            wealth.append(after)
        for s in range(grid.steps + 1):
            stop = min(s, cancel_step)
            j_stop = nodes[stop]
            if cancel_step < s:
                payoff = price.upper[cancel_step][j_stop]
            elif s < cancel_step:
                payoff = price.lower[s][j_stop]
            elif s < grid.steps:
                payoff = price.tie[s][j_stop]
            else:
                payoff = float(price.terminal[j_stop])
            shortfall = payoff - wealth[stop]
            report.shortfall = max(report.shortfall, shortfall)
            if shortfall > tolerance:
                report._flag("superhedge", shortfall, path=path.tolist(), step=s)

    if grid.steps <= SADDLE_MAX_DEPTH:
        game = DynkinGameSpec(
            grid,
            price.lower.map_steps(lambda k, v: discount[k] * v),
            price.upper.map_steps(lambda k, v: discount[k] * v),
            price.tie.map_steps(lambda k, v: discount[k] * v),
            terminal_values(grid, discount[-1] * price.terminal),
            measure=market.risk_neutral_measure(),
        )
        best_lower, _ = enumeration_value(game)
        report.enumeration_gap = abs(best_lower - price.price)
        if report.enumeration_gap > SADDLE_TOL * (1.0 + abs(price.price)):
            report._flag("enumeration value", report.enumeration_gap)
    logger.info(f"Hedge verified on {len(paths)} paths: passed={report.passed}")
    return report


def load_option(source: Union[Path, str, dict], steps: Optional[int] = None) -> Tuple[MarketModel, dict]:
    """Keys: market {S0, r, b, delta, T, N, u, d}, payoffs {L, U, Q, xi} as node functions of S."""
    config = source if isinstance(source, dict) else get_yaml_data(Path(source))
    if "market" not in config or "payoffs" not in config:
        raise GBSDEConfigError("an option configuration needs market and payoffs")
    market = MarketModel.from_config(config["market"], steps)
    payoffs = config["payoffs"]
    if "L" not in payoffs or "U" not in payoffs:
        raise GBSDEConfigError("payoffs need L and U")
    return market, {
        "lower": catalog.node_function(payoffs["L"]),
        "upper": catalog.node_function(payoffs["U"]),
        "tie": catalog.node_function(payoffs["Q"]) if "Q" in payoffs else None,
        "terminal": catalog.node_function(payoffs["xi"]) if "xi" in payoffs else None,
    }
