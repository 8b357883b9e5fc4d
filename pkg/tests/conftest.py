# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

import copy
import json

import pytest

from gbsde_lab.problem import load_problem

from tests.spellbook import DATA_DIR, LADDER_CONFIG, QUADRATIC_CONFIG


def load_json(name: str) -> dict:
    return json.loads((DATA_DIR / name).read_text())


def with_changes(config: dict, **changes) -> dict:
    """Deep copy of a configuration with top-level keys replaced."""
    changed = copy.deepcopy(config)
    changed.update(changes)
    return changed


@pytest.fixture
def zero_json():
    return load_json("zero.json")


@pytest.fixture
def quadratic_json():
    return load_json("quadratic.json")


@pytest.fixture
def ladder_json():
    return load_json("ladder.json")


@pytest.fixture
def snell_json():
    return load_json("snell.json")


@pytest.fixture
def onestep_json():
    return load_json("onestep.json")


@pytest.fixture
def put_penalty_json():
    return load_json("put_penalty.json")


@pytest.fixture
def quadratic_spec():
    return load_problem(QUADRATIC_CONFIG)


@pytest.fixture
def ladder_spec():
    return load_problem(LADDER_CONFIG)
