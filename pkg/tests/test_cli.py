# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

import json

import pytest

from flexmock import flexmock

from gbsde_lab import cli
from gbsde_lab.cli import RunRequest, main, refine
from gbsde_lab.constants import EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, REFINE_STEPS
from gbsde_lab.exceptions import GBSDEConfigError, GBSDESolverError

from tests.spellbook import (
    DATA_DIR,
    LADDER_CONFIG,
    ONESTEP_CONFIG,
    PUT_PENALTY_CONFIG,
    QUADRATIC_CONFIG,
    SNELL_CONFIG,
    ZERO_CONFIG,
)


def summary_of(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


class TestRunRequest(object):
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mode": "simulate"},
            {"mode": "solve"},
            {"mode": "solve", "config": ZERO_CONFIG, "output_format": "xml"},
            {"mode": "verify", "target": "everything"},
            {"mode": "dynkin", "config": ONESTEP_CONFIG, "refine": True},
            {"mode": "solve", "config": ZERO_CONFIG, "steps": 0},
            {"mode": "verify", "target": "solver", "batch": 0},
        ],
    )
    def test_invalid_request(self, kwargs):
        with pytest.raises(GBSDEConfigError):
            RunRequest(**kwargs)

    def test_from_args(self):
        args = cli.build_parser().parse_args(["verify", "saddle", "--batch", "3", "--seed", "9"])
        request = RunRequest.from_args(args)
        assert request.mode == "verify"
        assert request.target == "saddle"
        assert request.batch == 3
        assert request.seed == 9
        assert request.config is None


class TestModes(object):
    def test_solve(self, capsys):
        assert main(["solve", "--config", str(ZERO_CONFIG)]) == EXIT_OK
        summary = summary_of(capsys)
        assert summary["mode"] == "solve"
        assert summary["Y0"] == pytest.approx(0.25)
        assert summary["passed"] is True
        assert summary["fallback_nodes"] == 0

    def test_steps_override(self, capsys):
        assert main(["solve", "--config", str(QUADRATIC_CONFIG), "--steps", "8"]) == EXIT_OK
        assert summary_of(capsys)["steps"] == 8

    def test_dynkin(self, capsys):
        assert main(["dynkin", "--config", str(ONESTEP_CONFIG)]) == EXIT_OK
        summary = summary_of(capsys)
        assert summary["value"] == pytest.approx(2.0)
        assert summary["recursion_gap"] == 0.0
        assert summary["saddle"]["passed"] is True

    def test_option(self, capsys):
        assert main(["option", "--config", str(PUT_PENALTY_CONFIG)]) == EXIT_OK
        summary = summary_of(capsys)
        assert summary["price"] == pytest.approx(5.0)
        assert summary["cancel_nodes"] == [[0, 0]]
        assert summary["hedge"]["passed"] is True

    def test_missing_config_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "missing.json")]) == EXIT_VALIDATION

    def test_config_is_a_directory(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path)]) == EXIT_VALIDATION

    def test_invalid_problem(self, tmp_path):
        config = tmp_path / "swapped.yaml"
        config.write_text("grid: {T: 1.0, N: 4}\nbarriers: {L: 1.0, U: 0.0}\nterminal: 0.5\n")
        assert main(["solve", "--config", str(config)]) == EXIT_VALIDATION

    def test_overflowing_expression(self, tmp_path):
        config = tmp_path / "overflow.yaml"
        config.write_text("grid: {T: 1.0, N: 4}\nbarriers: {L: -1.0, U: 1.0}\nterminal: \"10.0**400 * 0\"\n")
        assert main(["solve", "--config", str(config)]) == EXIT_VALIDATION

    def test_solver_failure(self):
        flexmock(cli).should_receive("solve").and_raise(GBSDESolverError("generator fixed point not found"))
        assert main(["solve", "--config", str(ZERO_CONFIG)]) == EXIT_SOLVER


class TestOutput(object):
    def test_tables_written(self, tmp_path):
        out = tmp_path / "zero"
        assert main(["solve", "--config", str(ZERO_CONFIG), "--out", str(out)]) == EXIT_OK
        lines = (out / "solution.csv").read_text().splitlines()
        assert lines[0] == "step,level,Y,Z,dK_plus,dK_minus"
        assert len(lines) == 1 + 15
        assert lines[-1].endswith(",,,")
        summary = json.loads((out / "summary.json").read_text())
        assert summary["steps"] == 4

    def test_json_tables(self, tmp_path):
        out = tmp_path / "game"
        assert main(["dynkin", "--config", str(ONESTEP_CONFIG), "--out", str(out), "--format", "json"]) == EXIT_OK
        records = json.loads((out / "game.json").read_text())
        assert records[0] == {"step": 0, "level": 0, "Y": 2.0, "stop_minimizer": False, "stop_maximizer": False}

    def test_output_is_deterministic(self, tmp_path):
        for name in ("first", "second"):
            arguments = ["solve", "--config", str(QUADRATIC_CONFIG), "--out", str(tmp_path / name)]
            assert main(arguments) == EXIT_OK
        for filename in ("solution.csv", "summary.json"):
            assert (tmp_path / "first" / filename).read_bytes() == (tmp_path / "second" / filename).read_bytes()


class TestRefine(object):
    def test_infinite_barriers_skip_transform(self):
        header, rows = refine(RunRequest("solve", config=ZERO_CONFIG, refine=True))
        assert header[0] == "N"
        assert [row[0] for row in rows] == list(REFINE_STEPS)
        for steps, direct, transformed, gap, _ in rows:
            assert direct == pytest.approx(0.25)
            assert transformed is None
            assert gap is None

    def test_routes_converge(self):
        _, rows = refine(RunRequest("solve", config=QUADRATIC_CONFIG, refine=True))
        gaps = [row[3] for row in rows]
        assert gaps[-1] < 5e-3
        assert all(finer <= coarser for coarser, finer in zip(gaps, gaps[1:]))
        assert rows[0][4] is None

    @pytest.mark.parametrize("config", [LADDER_CONFIG, SNELL_CONFIG])
    def test_barriers_without_zero_skip_transform(self, tmp_path, config):
        out = tmp_path / config.stem
        assert main(["solve", "--config", str(config), "--refine", "--out", str(out)]) == EXIT_OK
        records = json.loads((out / "summary.json").read_text())["refine"]
        assert [record["N"] for record in records] == list(REFINE_STEPS)
        for record in records:
            assert record["Y0_direct"] is not None
            assert record["Y0_transform"] is None
            assert record["route_gap"] is None
        assert (out / "refine.csv").exists()

    def test_refine_in_summary(self, capsys):
        assert main(["solve", "--config", str(ZERO_CONFIG), "--refine"]) == EXIT_OK
        summary = summary_of(capsys)
        assert len(summary["refine"]) == len(REFINE_STEPS)


class TestVerify(object):
    def test_saddle(self, capsys):
        assert main(["verify", "saddle", "--batch", "2"]) == EXIT_OK
        summary = summary_of(capsys)
        assert summary["target"] == "saddle"
        assert summary["games"] == 2

    def test_comparison(self, capsys):
        assert main(["verify", "comparison", "--batch", "3", "--seed", "1"]) == EXIT_OK
        assert summary_of(capsys)["passed"] is True

    def test_solver(self, capsys):
        assert main(["verify", "solver", "--batch", "4", "--steps", "8"]) == EXIT_OK
        assert summary_of(capsys)["passed"] is True

    def test_transform(self, capsys):
        assert main(["verify", "transform", "--config", str(QUADRATIC_CONFIG)]) == EXIT_OK
        assert summary_of(capsys)["passed"] is True

    def test_ladder(self, capsys):
        assert main(["verify", "ladder", "--config", str(LADDER_CONFIG)]) == EXIT_OK
        assert summary_of(capsys)["details"]["stationary index"] == 3

    def test_transform_needs_config(self):
        assert main(["verify", "transform"]) == EXIT_VALIDATION

    def test_transform_rejects_infinite_barriers(self):
        assert main(["verify", "transform", "--config", str(DATA_DIR / "zero.json")]) == EXIT_VALIDATION
