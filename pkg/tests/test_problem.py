# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

import math

import numpy as np
import pytest

from gbsde_lab.engines.catalog import node_function
from gbsde_lab.engines.expression import Expression
from gbsde_lab.exceptions import GBSDEAssumptionError, GBSDEConfigError
from gbsde_lab.lattice import TimeGrid
from gbsde_lab.problem import (
    DriverF,
    ProblemSpec,
    load_problem,
    normalize_g,
    shift_by_S,
    shift_decomposition,
    unshift_solution,
    validate_A1_A2,
    validate_A3_A4,
    validate_C,
    validate_H,
    validate_structure,
)
from gbsde_lab.solver import residual_report, solve

from tests.conftest import with_changes
from tests.spellbook import ZERO_CONFIG


class TestLoadProblem(object):
    def test_zero_instance(self):
        spec = load_problem(ZERO_CONFIG)
        assert spec.name == "zero generator"
        assert spec.grid == TimeGrid(1.0, 4)
        assert spec.lower.max() == -math.inf
        assert spec.upper.min() == math.inf
        np.testing.assert_allclose(spec.terminal, 0.25 + 0.5 * spec.grid.brownian(4))

    def test_steps_override(self, quadratic_json):
        assert load_problem(quadratic_json, steps=8).grid.steps == 8

    def test_quadratic_envelopes(self, quadratic_spec):
        assert quadratic_spec.envelopes.eta.max_abs() == 0.0
        assert quadratic_spec.envelopes.C.min() == pytest.approx(0.2)
        assert quadratic_spec.envelopes.C.max() == pytest.approx(0.2)

    def test_clock_densities(self, ladder_spec):
        dt = ladder_spec.grid.dt
        assert ladder_spec.clock.dA.max() == pytest.approx(dt)
        assert ladder_spec.clock.dR.min() == pytest.approx(0.5 * dt)
        assert ladder_spec.clock.dR_minus.max_abs() == 0.0

    @pytest.mark.parametrize(
        "changes",
        [
            {"barriers": {"L": 1.0, "U": 0.0}},
            {"barriers": {"L": -0.1, "U": 0.1}},
            {"driver_f": {"kind": "cubic"}},
            {"terminal": "__import__('os')"},
            {"grid": {"T": 1.0}},
            {"clock": {"A": -1.0}},
            {"clock": {"R": 1.0, "R_plus": 1.0}},
        ],
    )
    def test_invalid_configuration(self, quadratic_json, changes):
        with pytest.raises(GBSDEConfigError):
            load_problem(with_changes(quadratic_json, **changes))

    def test_missing_terminal(self, quadratic_json):
        config = dict(quadratic_json)
        del config["terminal"]
        with pytest.raises(GBSDEConfigError):
            load_problem(config)

    def test_signed_forcing_is_split(self, quadratic_json):
        spec = load_problem(with_changes(quadratic_json, clock={"R": "-B"}))
        for k in range(spec.grid.steps):
            plus, minus = spec.clock.dR_plus.step(k), spec.clock.dR_minus.step(k)
            assert np.all(plus * minus == 0.0)
            np.testing.assert_allclose(plus - minus, -spec.grid.brownian(k) * spec.grid.dt)

    def test_expression_driver_needs_envelopes(self, quadratic_json):
        config = with_changes(quadratic_json, driver_f={"kind": "expression", "params": {"expr": "-z*z"}})
        with pytest.raises(GBSDEConfigError):
            load_problem(config)
        config["envelopes"] = {"eta": 0.0, "C": 2.0}
        assert load_problem(config).envelopes.C.max() == 2.0

    def test_overflowing_terminal(self, quadratic_json):
        with pytest.raises(GBSDEConfigError, match="finite terminal"):
            load_problem(with_changes(quadratic_json, terminal="10.0**400 * 0"))


class TestExpression(object):
    def test_symbols_and_literals(self):
        expression = Expression("2 * B + 1")
        assert expression.uses("B")
        assert not expression.uses("t")
        np.testing.assert_array_equal(expression.evaluate(B=np.array([0.0, 1.0])), [1.0, 3.0])

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("10.0**400", math.inf),
            ("9**9**9", math.inf),
            ("10**400", math.inf),
            ("1 / 0", math.inf),
            ("-1 / 0", -math.inf),
        ],
    )
    def test_overflow_follows_float_rules(self, text, expected):
        assert Expression(text).evaluate() == expected

    def test_overflow_times_zero(self):
        assert np.isnan(Expression("10.0**400 * 0").evaluate())

    @pytest.mark.parametrize("text", ["_literal0", "B.real", "__import__(1)", "True + B", "max(B)", ""])
    def test_rejected(self, text):
        with pytest.raises(GBSDEConfigError):
            Expression(text)


class TestValidators(object):
    def test_structure(self, quadratic_spec):
        report = validate_structure(quadratic_spec)
        assert report.passed
        assert report.checked > 0

    def test_growth_bounds(self, quadratic_spec):
        assert validate_A1_A2(quadratic_spec, samples=50).passed

    def test_growth_bound_violation(self, quadratic_spec):
        grid = quadratic_spec.grid
        spec = ProblemSpec.create(
            grid, terminal=0.0, lower=-0.5, upper=0.5,
            f=DriverF.from_callable(lambda t, B, y, z: -z ** 2, ("z",)), eta=0.0, C=0.2,
        )
        report = validate_A1_A2(spec, samples=50)
        assert not report.passed
        assert report.location["check"] == "f envelope"
        assert report.violations

    def test_centred_barriers(self, quadratic_spec):
        report = validate_A3_A4(quadratic_spec)
        assert report.passed
        assert report.details["zero between barriers"]
        assert report.details["shift between barriers"] is None

    def test_transformed_setting(self, ladder_spec, quadratic_spec):
        assert validate_H(ladder_spec, samples=50).passed
        report = validate_H(quadratic_spec, samples=50)
        assert not report.passed
        assert report.location["check"] == "L > 0"

    def test_strong_assumptions(self, ladder_spec):
        report = validate_C(ladder_spec, samples=50)
        assert report.passed
        assert report.details["A_T"] == pytest.approx(1.0)
        assert report.details["|R|_T"] == pytest.approx(0.5)


class TestShiftAndNormalize(object):
    def setup_method(self):
        self.grid = TimeGrid(1.0, 6)

    def test_no_admissible_shift(self):
        spec = ProblemSpec.create(self.grid, terminal=1.5, lower=1.0, upper=2.0)
        with pytest.raises(GBSDEAssumptionError):
            shift_by_S(spec)

    def test_centred_instance_is_not_shifted(self, quadratic_spec):
        assert shift_by_S(quadratic_spec) is quadratic_spec

    def test_doob_decomposition(self):
        spec = ProblemSpec.create(
            self.grid, terminal=1.5, lower=1.0, upper=2.0, shift=node_function("1.5 + 0.1 * B * B"),
        )
        dV, alpha = shift_decomposition(spec)
        # E[B_{k+1}^2 - B_k^2] = dt and the integrand of B^2 is 2 B
        np.testing.assert_allclose(dV.step(3), 0.1 * self.grid.dt)
        np.testing.assert_allclose(alpha.step(3), 0.2 * self.grid.brownian(3))

    def test_shifted_solution_solves_original(self):
        spec = ProblemSpec.create(
            self.grid, terminal=node_function("1.5 + 0.2 * B / (1 + abs(B))"), lower=1.0, upper=2.0,
            f=DriverF.from_callable(lambda t, B, y, z: -0.1 * z ** 2, ("z",)), eta=0.0, C=0.2,
            shift=node_function("1.5"),
        )
        shifted = shift_by_S(spec)
        assert shifted.lower.max() == pytest.approx(-0.5)
        solution = unshift_solution(spec, solve(shifted))
        assert residual_report(spec, solution).passed()
        assert solution.root == pytest.approx(solve(spec).root, abs=1e-12)

    def test_normalize_keeps_g_dA(self, ladder_spec):
        normalized = normalize_g(ladder_spec)
        grid = ladder_spec.grid
        for k in range(grid.steps):
            y = np.full(k + 1, 0.5)
            before = ladder_spec.g.evaluate(grid, k, y) * ladder_spec.clock.dA.step(k)
            after = normalized.g.evaluate(grid, k, y) * normalized.clock.dA.step(k)
            np.testing.assert_allclose(after, before)
        assert np.all(np.abs(normalized.g.evaluate(grid, 0, np.array([0.5]))) <= 1.0)
