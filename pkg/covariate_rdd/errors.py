# SPDX-FileCopyrightText: (C) covariate-rdd authors
#
# SPDX-License-Identifier: MIT
"""Exceptions raised by the estimation library.

Every error carries a ``category`` and an ``exit_code`` so the command line can
map it to a distinct exit status without inspecting messages.
"""


class RddError(Exception):
    category = "error"
    exit_code = 1


class RangeError(RddError, ValueError):
    category = "usage"
    exit_code = 2


class InvalidBandwidthError(RangeError):
    pass


class InvalidDensityError(RangeError):
    pass


class InvalidKernelError(RangeError):
    pass


class InvalidDgpError(RangeError):
    pass


class IngestionError(RddError, ValueError):
    category = "ingestion"
    exit_code = 3


class SingularityError(RddError):
    category = "numerical"
    exit_code = 4


class SingularDesignError(SingularityError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class InsufficientSupportError(RddError):
    category = "insufficient-support"
    exit_code = 5


class OneSidedDataError(InsufficientSupportError):
    pass
