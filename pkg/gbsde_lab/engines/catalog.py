# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

"""
Catalogs for node functions (barriers, terminal values, clock densities) and
generators. Every catalog generator declares its own growth envelopes.
"""

import logging

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Tuple

import numpy as np

from gbsde_lab.engines.expression import Expression
from gbsde_lab.exceptions import GBSDEConfigError
from gbsde_lab.lattice import AdaptedField, TimeGrid
from gbsde_lab.utils import parse_real

logger = logging.getLogger(__name__)

NODE_FUNCTION_KINDS = ("constant", "affine", "brownian", "put", "call", "expression")
F_KINDS = ("zero", "constant", "linear", "quadratic_z", "expression")
G_KINDS = ("zero", "constant", "linear", "expression")
UTILITY_KINDS = ("identity", "affine", "power", "exp")


class NodeFunction:
    """f(t, B, S) evaluated on all nodes of one step at once."""

    def __init__(self, fn: Callable, description: str, uses_stock: bool = False):
        self._fn = fn
        self.description = description
        self.uses_stock = uses_stock

    def __repr__(self):
        return f"NodeFunction({self.description})"

    def __call__(self, t: float, B: np.ndarray, S: Optional[np.ndarray] = None) -> np.ndarray:
        if self.uses_stock and S is None:
            raise GBSDEConfigError(f"{self.description} needs a stock price, only available with a market")
        B = np.asarray(B, dtype=float)
        return np.array(np.broadcast_to(self._fn(t, B, S), B.shape), dtype=float)

    def field(
        self,
        grid: TimeGrid,
        final_step: Optional[int] = None,
        stock: Optional[AdaptedField] = None,
        name: str = "",
    ) -> AdaptedField:
        return AdaptedField.from_steps(
            grid,
            lambda k: self(grid.time(k), grid.brownian(k), None if stock is None else stock.step(k)),
            final_step,
            name=name or self.description,
        )


def _constant(value: float) -> NodeFunction:
    return NodeFunction(lambda t, B, S: np.full(B.shape, value), f"constant {value}")


def _underlying(params: dict) -> Tuple[str, bool]:
    underlying = params.get("underlying", "B")
    if underlying not in ("B", "S"):
        raise GBSDEConfigError(f"underlying must be 'B' or 'S', got {underlying!r}")
    return underlying, underlying == "S"


def node_function(spec: Any) -> NodeFunction:
    """
    Build a node function from its configuration.

    Accepted forms: a number, "inf" / "-inf", an expression string in t, B, S
    or a mapping with a ``kind`` from NODE_FUNCTION_KINDS.
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return _constant(float(spec))
    if isinstance(spec, str):
        if spec.strip().lower() in ("inf", "+inf", "-inf"):
            return _constant(parse_real(spec))
        return _expression_function(spec)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise GBSDEConfigError(f"cannot interpret node function {spec!r}")

    kind = spec["kind"]
    if kind == "constant":
        return _constant(parse_real(spec.get("value", 0.0), "constant value"))
    if kind == "affine":
        a = parse_real(spec.get("a", 0.0), "affine a")
        b = parse_real(spec.get("b", 0.0), "affine b")
        c = parse_real(spec.get("c", 0.0), "affine c")
        return NodeFunction(lambda t, B, S: a + b * B + c * t, f"affine {a} + {b}*B + {c}*t")
    if kind == "brownian":
        scale = parse_real(spec.get("scale", 1.0), "brownian scale")
        return NodeFunction(lambda t, B, S: scale * B, f"{scale}*B")
    if kind in ("put", "call"):
        strike = parse_real(spec.get("strike", 0.0), f"{kind} strike")
        offset = parse_real(spec.get("offset", 0.0), f"{kind} offset")
        scale = parse_real(spec.get("scale", 1.0), f"{kind} scale")
        underlying, uses_stock = _underlying(spec)
        sign = -1.0 if kind == "put" else 1.0

        def payoff(t, B, S):
            x = S if uses_stock else B
            return scale * np.maximum(sign * (x - strike), 0.0) + offset

        return NodeFunction(payoff, f"{kind} on {underlying} at {strike} + {offset}", uses_stock)
    if kind == "expression":
        return _expression_function(spec.get("expr"))
    raise GBSDEConfigError(f"unknown node function kind {kind!r}, expected one of {NODE_FUNCTION_KINDS}")


def _expression_function(text: str) -> NodeFunction:
    expression = Expression(text)
    if expression.uses("y") or expression.uses("z"):
        raise GBSDEConfigError(f"node function {text!r} may only use t, B and S")
    return NodeFunction(
        lambda t, B, S: expression.evaluate(t=t, B=B, S=S), f"expression {text}", expression.uses("S")
    )


@dataclass(frozen=True)
class GeneratorEntry:
    """
    A catalog generator.

    func is f(t, B, y, z) for drivers of (y, z) and g(t, B, y) for drivers of y.
    arguments lists the variables the value actually depends on.
    envelope(t, B, band) returns (eta, C) for f and the bound of |g| for g, where band
    is max(|L|, |U|) at the nodes; None means the caller has to supply envelopes.
    """
    kind: str
    params: dict
    func: Callable
    arguments: Tuple[str, ...]
    envelope: Optional[Callable] = field(default=None)


def _params(config: dict) -> dict:
    params = config.get("params", {}) or {}
    if not isinstance(params, dict):
        raise GBSDEConfigError(f"generator params must be a mapping, got {params!r}")
    return params


def generator_f(config: Any) -> GeneratorEntry:
    if config is None:
        config = {"kind": "zero"}
    if not isinstance(config, dict) or "kind" not in config:
        raise GBSDEConfigError(f"driver_f needs a kind, got {config!r}")
    kind = config["kind"]
    params = _params(config)

    if kind == "zero":
        return GeneratorEntry(
            kind, params, lambda t, B, y, z: 0.0, (),
            lambda t, B, band: (np.zeros_like(B), np.zeros_like(B)),
        )
    if kind == "constant":
        c = parse_real(params.get("c", 0.0), "constant c")
        return GeneratorEntry(
            kind, params, lambda t, B, y, z: c, (),
            lambda t, B, band: (np.full(B.shape, abs(c)), np.zeros_like(B)),
        )
    if kind == "linear":
        a = parse_real(params.get("a", 0.0), "linear a")
        b = parse_real(params.get("b", 0.0), "linear b")
        c = parse_real(params.get("c", 0.0), "linear c")
        arguments = tuple(name for name, coef in (("y", a), ("z", b)) if coef != 0.0)

        # |b z| <= |b|/2 + |b| z^2 / 2
        def linear_envelope(t, B, band):
            with np.errstate(invalid="ignore"):
                eta = np.where(a == 0.0, 0.0, abs(a) * band) + abs(c) + abs(b) / 2.0
            return eta, np.full(B.shape, abs(b))

        return GeneratorEntry(kind, params, lambda t, B, y, z: a * y + b * z + c, arguments, linear_envelope)
    if kind == "quadratic_z":
        coefficient = node_function(params.get("c", 1.0))
        offset = parse_real(params.get("offset", 0.0), "quadratic_z offset")

        def quadratic(t, B, y, z):
            return -0.5 * coefficient(t, B) * z ** 2 + offset

        def quadratic_envelope(t, B, band):
            c = coefficient(t, B)
            if np.any(c < 0.0):
                raise GBSDEConfigError("quadratic_z coefficient must be nonnegative")
            return np.full(B.shape, abs(offset)), c

        return GeneratorEntry(kind, params, quadratic, ("z",), quadratic_envelope)
    if kind == "expression":
        expression = Expression(params.get("expr", config.get("expr")))
        if expression.uses("S"):
            raise GBSDEConfigError("generators may not use the stock price")
        arguments = tuple(name for name in ("y", "z") if expression.uses(name))
        return GeneratorEntry(
            kind, params,
            lambda t, B, y, z: expression.evaluate(t=t, B=B, y=y, z=z),
            arguments,
        )
    raise GBSDEConfigError(f"unknown driver_f kind {kind!r}, expected one of {F_KINDS}")


def generator_g(config: Any) -> GeneratorEntry:
    if config is None:
        config = {"kind": "zero"}
    if not isinstance(config, dict) or "kind" not in config:
        raise GBSDEConfigError(f"driver_g needs a kind, got {config!r}")
    kind = config["kind"]
    params = _params(config)

    if kind == "zero":
        return GeneratorEntry(kind, params, lambda t, B, y: 0.0, (), lambda t, B, band: np.zeros_like(B))
    if kind == "constant":
        c = parse_real(params.get("c", 0.0), "constant c")
        return GeneratorEntry(kind, params, lambda t, B, y: c, (), lambda t, B, band: np.full(B.shape, abs(c)))
    if kind == "linear":
        a = parse_real(params.get("a", 0.0), "linear a")
        c = parse_real(params.get("c", 0.0), "linear c")

        def linear_bound(t, B, band):
            with np.errstate(invalid="ignore"):
                return np.where(a == 0.0, 0.0, abs(a) * band) + abs(c)

        return GeneratorEntry(
            kind, params, lambda t, B, y: a * y + c, ("y",) if a != 0.0 else (), linear_bound
        )
    if kind == "expression":
        expression = Expression(params.get("expr", config.get("expr")))
        if expression.uses("z") or expression.uses("S"):
            raise GBSDEConfigError("driver_g may only use t, B and y")
        bound = params.get("bound")
        envelope = None
        if bound is not None:
            bound = parse_real(bound, "driver_g bound")
            envelope = lambda t, B, band: np.full(B.shape, bound)  # noqa: E731
        return GeneratorEntry(
            kind, params,
            lambda t, B, y: expression.evaluate(t=t, B=B, y=y),
            ("y",) if expression.uses("y") else (),
            envelope,
        )
    raise GBSDEConfigError(f"unknown driver_g kind {kind!r}, expected one of {G_KINDS}")


def utility_function(config: Any) -> Tuple[str, dict, Callable]:
    """Nondecreasing utilities F for game payoffs: identity, affine, power and exp."""
    if config is None:
        config = {"kind": "identity"}
    if isinstance(config, str):
        config = {"kind": config}
    if not isinstance(config, dict) or "kind" not in config:
        raise GBSDEConfigError(f"utility needs a kind, got {config!r}")
    kind = config["kind"]
    params = _params(config)

    if kind == "identity":
        return kind, params, lambda x: np.asarray(x, dtype=float)
    if kind == "affine":
        a = parse_real(params.get("a", 1.0), "affine a")
        b = parse_real(params.get("b", 0.0), "affine b")
        if not a > 0.0:
            raise GBSDEConfigError(f"affine utility needs a > 0, got {a}")
        return kind, params, lambda x: a * np.asarray(x, dtype=float) + b
    if kind == "power":
        shift = parse_real(params.get("shift", 0.0), "power shift")
        p = parse_real(params.get("p", 1.0), "power p")
        if not p > 0.0:
            raise GBSDEConfigError(f"power utility needs p > 0, got {p}")

        def power(x):
            base = np.asarray(x, dtype=float) + shift
            if np.any(base < 0.0):
                raise GBSDEConfigError(f"power utility undefined below -{shift}")
            return base ** p

        return kind, params, power
    if kind == "exp":
        theta = parse_real(params.get("theta", 1.0), "exp theta")
        if not theta > 0.0:
            # exp(-theta x) is decreasing, not an admissible game utility
            raise GBSDEConfigError(f"exp utility needs theta > 0, got {theta}")
        return kind, params, lambda x: np.exp(theta * np.asarray(x, dtype=float))
    raise GBSDEConfigError(f"unknown utility kind {kind!r}, expected one of {UTILITY_KINDS}")
