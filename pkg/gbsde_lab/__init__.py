# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

__version__ = "0.1.0"
