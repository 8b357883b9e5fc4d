# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

import numpy as np
import pytest

from flexmock import flexmock
from hypothesis import given, settings, strategies as st

from gbsde_lab import solver
from gbsde_lab.compare import random_problem
from gbsde_lab.engines.oracles import snell_envelope
from gbsde_lab.exceptions import GBSDEConfigError, GBSDESolverError
from gbsde_lab.lattice import AdaptedField, TimeGrid
from gbsde_lab.problem import DriverF, ProblemSpec, load_problem
from gbsde_lab.solver import (
    LatticeSolution,
    SolverConfig,
    backward_step,
    residual_report,
    solve,
)

from tests.spellbook import SNELL_CONFIG, ZERO_CONFIG


def discounting_spec(steps: int = 8) -> ProblemSpec:
    """Y = E[Y'] - 2 Y dt, so Y_0 = (1 + 2 dt)^-N for a unit terminal value."""
    return ProblemSpec.create(
        TimeGrid(1.0, steps), terminal=1.0,
        f=DriverF.from_callable(lambda t, B, y, z: -2.0 * y, ("y",)), eta=0.0, C=0.0,
    )


class TestSolverConfig(object):
    @pytest.mark.parametrize(
        "changes",
        [
            {"picard_tol": 0.0},
            {"picard_tol": -1e-3},
            {"damping": 0.0},
            {"damping": 1.5},
            {"picard_max_iter": 0},
        ],
    )
    def test_invalid_config(self, changes):
        with pytest.raises(GBSDEConfigError):
            SolverConfig(**changes)


class TestSolve(object):
    def test_zero_generator(self):
        solution = solve(load_problem(ZERO_CONFIG))
        assert solution.root == pytest.approx(0.25, abs=1e-14)
        assert solution.dK_plus.max_abs() == 0.0
        assert solution.dK_minus.max_abs() == 0.0
        assert solution.Z.allclose(AdaptedField.constant(solution.grid, 0.5, 3))

    def test_snell_envelope(self):
        spec = load_problem(SNELL_CONFIG)
        solution = solve(spec)
        assert solution.Y.allclose(snell_envelope(spec.lower), atol=0.0)
        assert solution.dK_minus.max_abs() == 0.0

    def test_expected_reflection(self):
        spec = load_problem(SNELL_CONFIG)
        solution = solve(spec)
        plus, minus = solution.expected_totals(spec.measure)
        probability = spec.measure.node_probabilities(spec.grid).step(spec.grid.steps)
        assert minus == 0.0
        assert solution.root == pytest.approx(float(np.dot(probability, spec.terminal)) + plus, abs=1e-12)

    def test_diagnostics(self, quadratic_spec):
        solution = solve(quadratic_spec)
        assert solution.diagnostics["fallback_nodes"] == 0
        assert solution.diagnostics["picard_iterations"] >= 1
        assert set(solution.diagnostics["residuals"]) == {"band", "skorohod", "singularity", "identity", "terminal"}

    def test_rows(self):
        solution = solve(load_problem(ZERO_CONFIG))
        rows = list(solution.rows())
        assert len(rows) == 15
        assert rows[0][:3] == (0, 0, pytest.approx(0.25))
        assert rows[-1][3:] == (None, None, None)

    def test_terminal_outside_band(self):
        spec = ProblemSpec.create(TimeGrid(1.0, 2), terminal=0.0, lower=-1.0, upper=1.0)
        moved = ProblemSpec(
            grid=spec.grid, f=spec.f, g=spec.g, barriers=spec.barriers, terminal=np.full(3, 2.0),
            clock=spec.clock, envelopes=spec.envelopes, measure=spec.measure, name="outside",
        )
        with pytest.raises(GBSDEConfigError):
            solve(moved)


class TestBackwardStep(object):
    def setup_method(self):
        self.spec = discounting_spec(4)

    @pytest.mark.parametrize("values", [np.ones(3), np.array([1.0, np.nan])])
    def test_bad_successors(self, values):
        with pytest.raises(GBSDESolverError):
            backward_step(self.spec, 0, values)

    def test_one_step(self):
        result = backward_step(self.spec, 1, np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(result.Y, np.array([1.5, 2.5]) / 1.5)
        np.testing.assert_allclose(result.Z, 1.0)
        assert result.fallback_nodes == 0

    def test_bracketing_fallback(self):
        config = SolverConfig(picard_max_iter=1)
        solution = solve(self.spec, config)
        assert solution.diagnostics["fallback_nodes"] > 0
        assert solution.root == pytest.approx(1.5 ** -4, abs=1e-12)
        assert residual_report(self.spec, solution).passed()

    def test_fallback_disabled(self):
        with pytest.raises(GBSDESolverError) as error:
            solve(self.spec, SolverConfig(picard_max_iter=1, bisection_fallback=False))
        assert error.value.step == 3
        assert "generator fixed point not found" in str(error.value)

    def test_no_bracket(self):
        flexmock(solver).should_receive("_bracket_root").and_return(None)
        with pytest.raises(GBSDESolverError) as error:
            solve(self.spec, SolverConfig(picard_max_iter=1))
        assert error.value.diagnostics["width"] >= 0.0

    def test_picard_matches_fallback(self):
        direct = solve(discounting_spec(16))
        assert direct.diagnostics["fallback_nodes"] == 0
        assert direct.root == pytest.approx((1.0 + 2.0 / 16) ** -16, abs=1e-10)


class TestResidualReport(object):
    def test_solution_passes(self, quadratic_spec):
        report = residual_report(quadratic_spec, solve(quadratic_spec))
        assert report.passed()
        assert report.singularity == 0.0

    def test_tampered_solution_fails(self, quadratic_spec):
        solution = solve(quadratic_spec)
        tampered = LatticeSolution(
            solution.grid, solution.Y, solution.Z, solution.dK_plus + 1e-3, solution.dK_minus
        )
        report = residual_report(quadratic_spec, tampered)
        assert not report.passed()
        assert report.identity == pytest.approx(1e-3, rel=1e-6)

    def test_band_violation_is_located(self, quadratic_spec):
        solution = solve(quadratic_spec)
        moved = LatticeSolution(
            solution.grid, solution.Y + 0.75, solution.Z, solution.dK_plus, solution.dK_minus
        )
        report = residual_report(quadratic_spec, moved)
        assert report.band > 0.0
        assert report.locations["band"][0] <= quadratic_spec.grid.steps

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 31 - 1), steps=st.sampled_from([4, 8, 16]))
    def test_random_instances(self, seed, steps):
        config = random_problem(np.random.default_rng(seed), steps)
        spec = load_problem(config)
        solution = solve(spec)
        report = residual_report(spec, solution)
        assert report.passed(), report.maxima()
