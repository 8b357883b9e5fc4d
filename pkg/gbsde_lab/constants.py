# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

from typing import Tuple

PICARD_TOL: float = 1e-12
PICARD_MAX_ITER: int = 200
PICARD_DAMPING: float = 1.0

# Reports compare against these unless told otherwise
RESIDUAL_TOL: float = 1e-10
BAND_TOL: float = 1e-12
SKOROHOD_TOL: float = 1e-14

SUPCONV_RESOLUTION: float = 1e-3
LADDER_RESOLUTION: float = 1e-2
LADDER_MAX_INDEX: int = 6
SUPCONV_MAX_OFFSETS: int = 20000
SUPCONV_CHUNK_SIZE: int = 2000000

ENUMERATION_NODE_LIMIT: int = 16
SADDLE_MAX_DEPTH: int = 3

REFINE_STEPS: Tuple[int, ...] = (8, 16, 32, 64)

# Transformed forcing: dR_bar = FORCING_CLOCK_RATIO * dA_bar + eta * m * dt
FORCING_CLOCK_RATIO: float = 0.5

VALIDATION_SAMPLES: int = 1000
VALIDATION_Z_RANGE: float = 5.0
VALIDATION_Y_RANGE: float = 10.0

EXIT_OK: int = 0
EXIT_VALIDATION: int = 2
EXIT_SOLVER: int = 3

NUMBER_FORMAT: str = ".17g"
LOG_FILE_NAME: str = "gbsde-lab.log"

MAX_PATH_STEPS: int = 20
