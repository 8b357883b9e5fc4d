# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#


class GBSDEException(Exception):
    """ Generic exception when something goes wrong """


class GBSDEConfigError(GBSDEException):
    """ Configuration or problem instance does not describe a valid problem """


class GBSDEAssumptionError(GBSDEException):
    pass


class GBSDELatticeError(GBSDEException):
    pass


class GBSDECountExceeded(GBSDEException):
    pass


class GBSDETransformError(GBSDEException):
    pass


class GBSDESolverError(GBSDEException):
    """
    Per-node fixed point could not be found.

    :param message: str, human readable reason
    :param step: int, lattice step of the failing node
    :param level: int, level of the failing node
    :param diagnostics: dict, last iterates and bracket used
    """

    def __init__(self, message: str, step: int = -1, level: int = -1, diagnostics: dict = None):
        super().__init__(message)
        self.step = step
        self.level = level
        self.diagnostics = diagnostics or {}

    def __str__(self):
        text = super().__str__()
        if self.step < 0:
            return text
        return f"{text} at node ({self.step}, {self.level}): {self.diagnostics}"


class GBSDEArbitrageError(GBSDEException):
    pass
