# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

import numpy as np
import pytest

from hypothesis import given, settings, strategies as st

from gbsde_lab.exceptions import GBSDETransformError
from gbsde_lab.lattice import AdaptedField, enumerate_paths, path_levels
from gbsde_lab.problem import load_problem
from gbsde_lab.solver import LatticeSolution, residual_report, solve, solve_via_transform
from gbsde_lab.transform import (
    check_bounds,
    compute_m,
    map_solution_forward,
    map_solution_inverse,
    running_m_on_path,
    transform_data,
)

from tests.conftest import with_changes


class TestComputeM(object):
    def test_constant_data(self, quadratic_spec):
        m = compute_m(quadratic_spec)
        # |U| + 2 C + 1 = 0.5 + 0.4 + 1
        assert m.min() == pytest.approx(1.9)
        assert m.max() == pytest.approx(1.9)

    def test_clock_enters_m(self, quadratic_json):
        spec = load_problem(with_changes(quadratic_json, clock={"A": 2.0, "R_plus": 1.0}))
        m = compute_m(spec)
        np.testing.assert_allclose(m.step(spec.grid.steps), 1.9 + 3.0)
        np.testing.assert_allclose(m.step(8), 1.9 + 1.5)

    def test_path_dependent_m(self, quadratic_json):
        spec = load_problem(with_changes(quadratic_json, barriers={"L": -0.5, "U": "0.5 + 0.1 * B"}, terminal=0.0))
        with pytest.raises(GBSDETransformError):
            compute_m(spec)
        # the path oracle is still available
        running = running_m_on_path(spec, [1] * spec.grid.steps)
        assert running[0] == pytest.approx(1.9)
        assert np.all(np.diff(running) >= 0.0)

    def test_path_oracle_matches_nodes(self, quadratic_json):
        spec = load_problem(with_changes(quadratic_json, clock={"A": 1.0, "R": 0.5}), steps=4)
        m = compute_m(spec)
        paths = enumerate_paths(4)
        for path, levels in zip(paths, path_levels(paths)):
            expected = [m[k][levels[k]] for k in range(5)]
            np.testing.assert_allclose(running_m_on_path(spec, path), expected)

    def test_infinite_upper_barrier(self, zero_json):
        with pytest.raises(GBSDETransformError):
            compute_m(load_problem(zero_json))


class TestTransformData(object):
    def setup_method(self):
        self.samples = 200

    def test_bounds_hold(self, quadratic_spec):
        bundle = transform_data(quadratic_spec)
        report = check_bounds(bundle, samples=self.samples)
        assert report.passed, report.violations
        assert bundle.lower.min() > 0.0
        assert bundle.upper.max() <= np.exp(-1.0)

    def test_bounds_with_clock_and_forcing(self, quadratic_json):
        config = with_changes(
            quadratic_json,
            driver_g={"kind": "linear", "params": {"a": 0.5, "c": -0.2}, "normalize": True},
            clock={"A": 1.0, "R_plus": 0.3, "R_minus": 0.2},
        )
        bundle = transform_data(load_problem(config))
        assert check_bounds(bundle, samples=self.samples).passed
        assert bundle.dA_bar.min() > 0.0
        assert bundle.dR_bar.min() > 0.0

    def test_infinite_barriers(self, zero_json):
        with pytest.raises(GBSDETransformError):
            transform_data(load_problem(zero_json))

    def test_rows(self, quadratic_spec):
        bundle = transform_data(quadratic_spec)
        rows = list(bundle.rows())
        assert len(rows) == sum(k + 1 for k in range(quadratic_spec.grid.steps + 1))
        assert rows[-1][5] is None
        k, j, m, L_bar, U_bar = rows[0][:5]
        assert (k, j) == (0, 0)
        assert L_bar == pytest.approx(np.exp(m * (-0.5 - m)))
        assert U_bar == pytest.approx(np.exp(m * (0.5 - m)))

    @settings(max_examples=25, deadline=None)
    @given(
        c=st.floats(min_value=0.0, max_value=2.0),
        lower=st.floats(min_value=-1.0, max_value=-0.1),
        upper=st.floats(min_value=0.1, max_value=1.0),
        offset=st.floats(min_value=-0.5, max_value=0.0),
    )
    def test_bounds_on_random_instances(self, c, lower, upper, offset):
        config = {
            "grid": {"T": 1.0, "N": 4},
            "barriers": {"L": lower, "U": upper},
            "terminal": f"min(max(B, {lower!r}), {upper!r})",
            "driver_f": {"kind": "quadratic_z", "params": {"c": c, "offset": offset}},
            "driver_g": {"kind": "constant", "params": {"c": -0.5}},
            "clock": {"A": 0.5, "R_plus": 0.2},
        }
        report = check_bounds(transform_data(load_problem(config)), samples=50, seed=1)
        assert report.passed, report.violations


class TestSolutionMaps(object):
    def test_forward_then_inverse(self, quadratic_spec):
        bundle = transform_data(quadratic_spec)
        solution = solve(quadratic_spec)
        forward = map_solution_forward(solution, bundle)
        assert forward.Y.min() > 0.0
        back = map_solution_inverse(forward, bundle)
        assert back.Y.allclose(solution.Y, atol=1e-12)
        assert back.Z.allclose(solution.Z, atol=1e-10)

    def test_forward_rejects_non_solutions(self, quadratic_spec):
        bundle = transform_data(quadratic_spec)
        grid = quadratic_spec.grid
        solution = solve(quadratic_spec)
        outside = LatticeSolution(
            grid, AdaptedField.constant(grid, 2.0), solution.Z, solution.dK_plus, solution.dK_minus
        )
        with pytest.raises(GBSDETransformError):
            map_solution_forward(outside, bundle)

    def test_inverse_undefined(self, quadratic_spec):
        bundle = transform_data(quadratic_spec)
        grid = quadratic_spec.grid
        zeros = AdaptedField.zeros(grid)
        increments = AdaptedField.zeros(grid, grid.steps - 1)
        with pytest.raises(GBSDETransformError):
            map_solution_inverse(LatticeSolution(grid, zeros, increments, increments, increments), bundle)

    def test_transformed_solution_is_a_solution(self, quadratic_spec):
        bundle = transform_data(quadratic_spec)
        transformed = solve(bundle.spec)
        assert residual_report(bundle.spec, transformed).passed()

    def test_both_routes_agree(self, quadratic_json):
        spec = load_problem(quadratic_json, 64)
        direct = solve(spec)
        routed = solve_via_transform(spec)
        assert routed.diagnostics["route"] == "transform"
        assert abs(direct.root - routed.root) < 5e-3
        assert residual_report(spec, routed).band <= 1e-12
