# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

"""
A book with our finest spells
"""
from pathlib import Path

TESTS_DIR = Path(__file__).parent
DATA_DIR = TESTS_DIR / "data"

ZERO_CONFIG = DATA_DIR / "zero.json"
QUADRATIC_CONFIG = DATA_DIR / "quadratic.json"
LADDER_CONFIG = DATA_DIR / "ladder.json"
SNELL_CONFIG = DATA_DIR / "snell.json"
ONESTEP_CONFIG = DATA_DIR / "onestep.json"
PUT_PENALTY_CONFIG = DATA_DIR / "put_penalty.json"
