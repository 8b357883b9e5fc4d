# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

"""
Recombining binomial lattice for a one-dimensional Brownian motion.

Node (k, j) sits at step k with j up-moves; its Brownian value is (2j - k) * sqrt(dt).
Children of (k, j) are (k + 1, j + 1) [up] and (k + 1, j) [down].
Fields are stored per step as numpy arrays of length k + 1, indexed by level.
"""

import itertools
import logging
import math

from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from gbsde_lab.constants import ENUMERATION_NODE_LIMIT, MAX_PATH_STEPS
from gbsde_lab.exceptions import GBSDECountExceeded, GBSDELatticeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if isinstance(self.steps, bool) or int(self.steps) != self.steps or self.steps < 1:
            raise GBSDELatticeError(f"number of steps must be a positive integer, got {self.steps}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise GBSDELatticeError(f"horizon must be positive and finite, got {self.horizon}")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def sqrt_dt(self) -> float:
        return math.sqrt(self.dt)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def time(self, k: int) -> float:
        return k * self.dt

    def check_step(self, k: int):
        if not 0 <= k <= self.steps:
            raise GBSDELatticeError(f"step {k} outside [0, {self.steps}]")

    def brownian(self, k: int) -> np.ndarray:
        self.check_step(k)
        return (2 * np.arange(k + 1) - k) * self.sqrt_dt

    def nodes(self, final_step: Optional[int] = None) -> Iterator["Node"]:
        final_step = self.steps if final_step is None else final_step
        for k in range(final_step + 1):
            for j in range(k + 1):
                yield Node(k, j)

    def with_steps(self, steps: int) -> "TimeGrid":
        return TimeGrid(self.horizon, steps)


@dataclass(frozen=True)
class Node:
    step: int
    level: int

    def __post_init__(self):
        if self.step < 0 or not 0 <= self.level <= self.step:
            raise GBSDELatticeError(f"invalid node ({self.step}, {self.level})")

    def up(self) -> "Node":
        return Node(self.step + 1, self.level + 1)

    def down(self) -> "Node":
        return Node(self.step + 1, self.level)

    def brownian(self, grid: TimeGrid) -> float:
        return (2 * self.level - self.step) * grid.sqrt_dt


def node_column(values: np.ndarray, like: np.ndarray) -> np.ndarray:
    """Reshape a per-node vector so it broadcasts against (k + 1, ...) arrays."""
    values = np.asarray(values, dtype=float)
    like = np.asarray(like)
    if like.ndim <= 1 or values.ndim == 0:
        return values
    return values.reshape(values.shape + (1,) * (like.ndim - values.ndim))


class AdaptedField:
    """
    Real values on every node of a grid up to final_step.

    Increment fields (dA, dR, dK, Z) live on steps 0..N-1 and describe the
    interval [t_k, t_{k+1}]; state fields (Y, L, U, m) live on steps 0..N.
    """

    def __init__(self, grid: TimeGrid, values: Sequence[np.ndarray], name: str = ""):
        self.grid = grid
        self.name = name
        if not 1 <= len(values) <= grid.steps + 1:
            raise GBSDELatticeError(f"field {name!r} has {len(values)} steps on a {grid.steps}-step grid")
        frozen = []
        for k, step_values in enumerate(values):
            arr = np.array(np.broadcast_to(np.asarray(step_values, dtype=float), (k + 1,)))
            arr.setflags(write=False)
            frozen.append(arr)
        self._values: Tuple[np.ndarray, ...] = tuple(frozen)

    def __repr__(self):
        return f"AdaptedField({self.name!r}, final_step={self.final_step})"

    @property
    def final_step(self) -> int:
        return len(self._values) - 1

    @classmethod
    def from_steps(
        cls, grid: TimeGrid, fn: Callable[[int], np.ndarray], final_step: Optional[int] = None, name: str = ""
    ) -> "AdaptedField":
        final_step = grid.steps if final_step is None else final_step
        return cls(grid, [fn(k) for k in range(final_step + 1)], name=name)

    @classmethod
    def constant(
        cls, grid: TimeGrid, value: float, final_step: Optional[int] = None, name: str = ""
    ) -> "AdaptedField":
        return cls.from_steps(grid, lambda k: np.full(k + 1, float(value)), final_step, name)

    @classmethod
    def zeros(cls, grid: TimeGrid, final_step: Optional[int] = None, name: str = "") -> "AdaptedField":
        return cls.constant(grid, 0.0, final_step, name)

    @classmethod
    def brownian_motion(cls, grid: TimeGrid, final_step: Optional[int] = None) -> "AdaptedField":
        return cls.from_steps(grid, grid.brownian, final_step, name="B")

    def step(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.final_step:
            raise GBSDELatticeError(f"field {self.name!r} not defined at step {k}")
        return self._values[k]

    def at(self, node: Node) -> float:
        return float(self.step(node.step)[node.level])

    def __getitem__(self, key) -> Union[np.ndarray, float]:
        if isinstance(key, Node):
            return self.at(key)
        if isinstance(key, tuple):
            return self.at(Node(*key))
        return self.step(key)

    def steps(self) -> Tuple[np.ndarray, ...]:
        return self._values

    def map(self, fn: Callable[[np.ndarray], np.ndarray], name: str = "") -> "AdaptedField":
        return AdaptedField(self.grid, [fn(v) for v in self._values], name=name or self.name)

    def map_steps(self, fn: Callable[[int, np.ndarray], np.ndarray], name: str = "") -> "AdaptedField":
        return AdaptedField(
            self.grid, [fn(k, v) for k, v in enumerate(self._values)], name=name or self.name
        )

    def combine(self, other, fn: Callable, name: str = "") -> "AdaptedField":
        if isinstance(other, AdaptedField):
            final_step = min(self.final_step, other.final_step)
            values = [fn(self._values[k], other.step(k)) for k in range(final_step + 1)]
        else:
            values = [fn(v, other) for v in self._values]
        return AdaptedField(self.grid, values, name=name or self.name)

    def __add__(self, other):
        return self.combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self.combine(other, np.subtract)

    def __rsub__(self, other):
        return self.combine(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self.combine(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.combine(other, np.divide)

    def __neg__(self):
        return self.map(np.negative)

    def truncated(self, final_step: int) -> "AdaptedField":
        if final_step > self.final_step:
            raise GBSDELatticeError(f"field {self.name!r} not defined at step {final_step}")
        return AdaptedField(self.grid, self._values[: final_step + 1], name=self.name)

    def flat(self) -> np.ndarray:
        return np.concatenate(self._values)

    def max(self) -> float:
        return float(np.max(self.flat()))

    def min(self) -> float:
        return float(np.min(self.flat()))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.flat())))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat())))

    def allclose(self, other: "AdaptedField", atol: float = 1e-12, rtol: float = 0.0) -> bool:
        if self.final_step != other.final_step:
            return False
        return all(
            np.allclose(a, b, atol=atol, rtol=rtol, equal_nan=False)
            for a, b in zip(self._values, other.steps())
        )

    def rows(self) -> Iterator[Tuple[int, int, float]]:
        for k, values in enumerate(self._values):
            for j, value in enumerate(values):
                yield k, j, float(value)

    def along(self, levels: np.ndarray) -> np.ndarray:
        """
        Gather values along paths.

        :param levels: int array (P, n + 1) of levels per step, see path_levels
        :return: array (P, min(n, final_step) + 1)
        """
        last = min(levels.shape[1] - 1, self.final_step)
        return np.stack([self._values[k][levels[:, k]] for k in range(last + 1)], axis=1)


@dataclass(frozen=True)
class BranchMeasure:
    """Up-probability per node, either one number or a field on steps 0..N-1."""
    q: Union[float, AdaptedField] = 0.5

    def __post_init__(self):
        values = self.q.flat() if isinstance(self.q, AdaptedField) else np.asarray([self.q], dtype=float)
        if not np.all((values > 0.0) & (values < 1.0)):
            raise GBSDELatticeError("up-probability must lie in (0, 1)")

    def up_probability(self, grid: TimeGrid, k: int) -> np.ndarray:
        if isinstance(self.q, AdaptedField):
            return self.q.step(k)
        return np.full(k + 1, float(self.q))

    def increments(self, grid: TimeGrid, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """Centred Brownian increments on the up and down branch of every step-k node."""
        q = self.up_probability(grid, k)
        return 2.0 * (1.0 - q) * grid.sqrt_dt, -2.0 * q * grid.sqrt_dt

    def node_probabilities(self, grid: TimeGrid, final_step: Optional[int] = None) -> AdaptedField:
        final_step = grid.steps if final_step is None else final_step
        probabilities = [np.ones(1)]
        for k in range(final_step):
            q = self.up_probability(grid, k)
            current = probabilities[-1]
            following = np.zeros(k + 2)
            following[1:] += q * current
            following[:-1] += (1.0 - q) * current
            probabilities.append(following)
        return AdaptedField(grid, probabilities, name="probability")

    def path_probabilities(self, grid: TimeGrid, paths: np.ndarray) -> np.ndarray:
        paths = np.asarray(paths, dtype=int)
        levels = path_levels(paths)
        probability = np.ones(paths.shape[0])
        for k in range(paths.shape[1]):
            q = self.up_probability(grid, k)[levels[:, k]]
            probability *= np.where(paths[:, k] == 1, q, 1.0 - q)
        return probability


def expect_step(next_values: np.ndarray, grid: TimeGrid, k: int, measure: BranchMeasure) -> np.ndarray:
    """E[X_{k+1} | F_k] for all step-k nodes; next_values has shape (k + 2, ...)."""
    next_values = np.asarray(next_values, dtype=float)
    q = node_column(measure.up_probability(grid, k), next_values[1:])
    return q * next_values[1:] + (1.0 - q) * next_values[:-1]


def martingale_rep_step(next_values: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """
    Integrand z with X_{k+1} = E[X_{k+1} | F_k] + z * dW on both branches,
    dW being the centred increment of BranchMeasure.increments.
    """
    next_values = np.asarray(next_values, dtype=float)
    return (next_values[1:] - next_values[:-1]) / (2.0 * grid.sqrt_dt)


def _successors(field: AdaptedField, node: Node) -> Tuple[float, float]:
    if node.step >= field.grid.steps:
        raise GBSDELatticeError(f"no successor for terminal node ({node.step}, {node.level})")
    following = field.step(node.step + 1)
    return float(following[node.level + 1]), float(following[node.level])


def expect_next(field: AdaptedField, node: Node, measure: BranchMeasure = BranchMeasure()) -> float:
    up, down = _successors(field, node)
    q = float(measure.up_probability(field.grid, node.step)[node.level])
    return q * up + (1.0 - q) * down


def martingale_rep(field: AdaptedField, node: Node, measure: BranchMeasure = BranchMeasure()) -> float:
    up, down = _successors(field, node)
    return (up - down) / (2.0 * field.grid.sqrt_dt)


@dataclass(frozen=True)
class StoppingRule:
    """
    Raw stop/continue flags on the non-recombining path tree.

    flags are heap ordered: the prefix made of moves b_0..b_{k-1} (1 = up) has
    index 2**k - 1 + int(b_0..b_{k-1} read as binary). Only prefixes shorter than
    max_step carry a decision; a rule that never fires stops at horizon.
    """
    flags: Tuple[bool, ...]
    max_step: int
    horizon: int

    def __post_init__(self):
        if len(self.flags) != 2 ** self.max_step - 1:
            raise GBSDELatticeError(
                f"{len(self.flags)} flags do not cover the {2 ** self.max_step - 1} prefixes of depth {self.max_step}"
            )
        if self.max_step > self.horizon:
            raise GBSDELatticeError("decisions beyond the horizon")

    @staticmethod
    def prefix_index(prefix: Sequence[int]) -> int:
        index = 0
        for move in prefix:
            index = 2 * index + int(move)
        return 2 ** len(prefix) - 1 + index

    def stops_at(self, prefix: Sequence[int]) -> bool:
        return bool(self.flags[self.prefix_index(prefix)])

    def stop_step(self, path: Sequence[int]) -> int:
        for k in range(self.max_step):
            if self.flags[self.prefix_index(path[:k])]:
                return k
        return self.horizon

    def stop_steps(self, paths: np.ndarray) -> np.ndarray:
        return np.array([self.stop_step(path) for path in paths], dtype=int)

    @classmethod
    def from_nodes(
        cls, grid: TimeGrid, stop: Callable[[int, int], bool], max_step: Optional[int] = None
    ) -> "StoppingRule":
        """Markov rule: stop at the first node (k, j) with stop(k, j) true."""
        max_step = grid.steps if max_step is None else max_step
        flags: List[bool] = []
        for k in range(max_step):
            for prefix in itertools.product((0, 1), repeat=k):
                flags.append(bool(stop(k, sum(prefix))))
        return cls(tuple(flags), max_step, grid.steps)

    @classmethod
    def never(cls, grid: TimeGrid, max_step: Optional[int] = None) -> "StoppingRule":
        return cls.from_nodes(grid, lambda k, j: False, max_step)

    @classmethod
    def immediately(cls, grid: TimeGrid, max_step: Optional[int] = None) -> "StoppingRule":
        return cls.from_nodes(grid, lambda k, j: True, max_step)


def enumerate_stopping_rules(grid: TimeGrid, max_step: Optional[int] = None) -> List[StoppingRule]:
    """All 2**(2**max_step - 1) raw rules; rules inducing the same stopping time are kept apart."""
    max_step = grid.steps if max_step is None else max_step
    if not 0 <= max_step <= grid.steps:
        raise GBSDELatticeError(f"max_step {max_step} outside [0, {grid.steps}]")
    interior = 2 ** max_step - 1
    if interior > ENUMERATION_NODE_LIMIT:
        raise GBSDECountExceeded(
            f"enumeration too large: {interior} decision nodes, limit is {ENUMERATION_NODE_LIMIT}"
        )
    rules = [
        StoppingRule(tuple(flags), max_step, grid.steps)
        for flags in itertools.product((False, True), repeat=interior)
    ]
    logger.debug(f"Enumerated {len(rules)} stopping rules of depth {max_step}")
    return rules


def _from_parents(values: np.ndarray, reduce: Callable, fill: float) -> np.ndarray:
    # child j' of step k + 1 has parents j' - 1 (up move) and j' (down move)
    from_up = np.concatenate([[fill], values])
    from_down = np.concatenate([values, [fill]])
    return reduce(from_up, from_down)


def cumulative_extremes(increments: AdaptedField) -> Tuple[AdaptedField, AdaptedField]:
    """Largest and smallest path sum of increments before each node, over all paths reaching it."""
    grid = increments.grid
    highest, lowest = [np.zeros(1)], [np.zeros(1)]
    for k in range(increments.final_step + 1):
        step_values = increments.step(k)
        highest.append(_from_parents(highest[-1] + step_values, np.maximum, -np.inf))
        lowest.append(_from_parents(lowest[-1] + step_values, np.minimum, np.inf))
    return AdaptedField(grid, highest, name="cumulative max"), AdaptedField(grid, lowest, name="cumulative min")


def running_max_extremes(values: AdaptedField) -> Tuple[AdaptedField, AdaptedField]:
    """Largest and smallest value of max_{i <= k} X_i over all paths reaching each node."""
    grid = values.grid
    highest, lowest = [values.step(0).copy()], [values.step(0).copy()]
    for k in range(1, values.final_step + 1):
        current = values.step(k)
        highest.append(np.maximum(_from_parents(highest[-1], np.maximum, -np.inf), current))
        lowest.append(np.maximum(_from_parents(lowest[-1], np.minimum, np.inf), current))
    return AdaptedField(grid, highest, name="running max"), AdaptedField(grid, lowest, name="running max min")


def enumerate_paths(max_step: int) -> np.ndarray:
    """Every move sequence of length max_step as an int array (2**max_step, max_step), 1 = up."""
    if not 0 <= max_step <= MAX_PATH_STEPS:
        raise GBSDECountExceeded(f"enumeration too large: {max_step} steps, limit is {MAX_PATH_STEPS}")
    return np.array(list(itertools.product((0, 1), repeat=max_step)), dtype=int).reshape(-1, max_step)


def path_levels(paths: np.ndarray) -> np.ndarray:
    paths = np.asarray(paths, dtype=int)
    if paths.ndim == 1:
        paths = paths[None, :]
    return np.concatenate([np.zeros((paths.shape[0], 1), dtype=int), np.cumsum(paths, axis=1)], axis=1)
