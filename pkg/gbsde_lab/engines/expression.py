# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

"""
Small arithmetic grammar for custom node functions and drivers.

Allowed: numbers, the symbols t, B, S, y, z, the operators + - * / **,
unary minus and the functions abs, exp, log, sqrt, min, max (two arguments).
Numbers are float64, so overflow gives inf instead of an exception.
Everything is evaluated with numpy so symbols may be arrays.
"""

import ast
import copy
import logging

from typing import Dict, FrozenSet

import numpy as np

from gbsde_lab.exceptions import GBSDEConfigError

logger = logging.getLogger(__name__)

SYMBOLS = frozenset({"t", "B", "S", "y", "z"})
LITERAL_PREFIX = "_literal"

FUNCTIONS = {
    "abs": np.abs,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "min": np.minimum,
    "max": np.maximum,
}

ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
)


class Expression:
    def __init__(self, text: str):
        self.text = text
        self.tree = self._parse(text)
        self.symbols: FrozenSet[str] = frozenset(
            node.id for node in ast.walk(self.tree)
            if isinstance(node, ast.Name) and node.id in SYMBOLS
        )
        self.literals: Dict[str, np.float64] = {}
        self._code = compile(self._bind_literals(self.tree), filename="<expression>", mode="eval")

    def __repr__(self):
        return f"Expression({self.text!r})"

    @staticmethod
    def _parse(text: str) -> ast.Expression:
        if not isinstance(text, str) or not text.strip():
            raise GBSDEConfigError(f"expression must be a non-empty string, got {text!r}")
        try:
            tree = ast.parse(text.strip(), mode="eval")
        except SyntaxError as se:
            raise GBSDEConfigError(f"expression {text!r} is not parseable: {se.msg}")
        for node in ast.walk(tree):
            if not isinstance(node, ALLOWED_NODES):
                raise GBSDEConfigError(
                    f"expression {text!r}: {type(node).__name__} is not allowed"
                )
            if isinstance(node, ast.Constant) and (
                isinstance(node.value, bool) or not isinstance(node.value, (int, float))
            ):
                raise GBSDEConfigError(f"expression {text!r}: only numeric constants allowed")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                    raise GBSDEConfigError(f"expression {text!r}: unknown function")
                if node.keywords:
                    raise GBSDEConfigError(f"expression {text!r}: keyword arguments not allowed")
                expected = 2 if node.func.id in ("min", "max") else 1
                if len(node.args) != expected:
                    raise GBSDEConfigError(
                        f"expression {text!r}: {node.func.id} takes {expected} argument(s)"
                    )
            if isinstance(node, ast.Name) and node.id not in SYMBOLS and node.id not in FUNCTIONS:
                raise GBSDEConfigError(f"expression {text!r}: unknown symbol {node.id!r}")
        return tree

    def _bind_literals(self, tree: ast.Expression) -> ast.Expression:
        # numbers become float64 names so overflow and division by zero follow numpy rules
        literals = self.literals

        class Literals(ast.NodeTransformer):
            def visit_Constant(self, node: ast.Constant) -> ast.Name:
                name = f"{LITERAL_PREFIX}{len(literals)}"
                try:
                    literals[name] = np.float64(node.value)
                except OverflowError:
                    literals[name] = np.float64(np.inf)
                return ast.copy_location(ast.Name(id=name, ctx=ast.Load()), node)

        return ast.fix_missing_locations(Literals().visit(copy.deepcopy(tree)))

    def uses(self, symbol: str) -> bool:
        return symbol in self.symbols

    def evaluate(self, **values) -> np.ndarray:
        missing = self.symbols - set(k for k, v in values.items() if v is not None)
        if missing:
            raise GBSDEConfigError(
                f"expression {self.text!r} needs {sorted(missing)} which are not available here"
            )
        namespace: Dict[str, object] = dict(FUNCTIONS)
        namespace.update(self.literals)
        namespace.update({k: v for k, v in values.items() if k in self.symbols})
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            try:
                result = eval(self._code, {"__builtins__": {}}, namespace)
            except ArithmeticError as ex:
                raise GBSDEConfigError(f"expression {self.text!r} cannot be evaluated: {ex}")
        return np.asarray(result, dtype=float)
