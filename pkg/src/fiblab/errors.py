"""Exception hierarchy. Every error carries enough context to name the
offending input (config field, point, or matrix) in CLI messages."""

from __future__ import annotations

import numpy as np


class FiblabError(Exception):
    """Base class for all package errors."""


class InputError(FiblabError):
    """Malformed configuration, dimension mismatch, or unusable region.

    Maps to CLI exit code 2.
    """


class OnZeroSetError(FiblabError):
    """Point too close to V = f^-1(0); Phi and the spherefication are undefined."""

    def __init__(self, x, fnorm: float, floor: float):
        self.x = np.asarray(x, dtype=float)
        self.fnorm = float(fnorm)
        self.floor = float(floor)
        super().__init__(
            f"||f(x)|| = {fnorm:.3e} <= floor {floor:.3e} at x = {self.x.tolist()}"
        )


class CriticalPointError(FiblabError):
    """Df_x is rank-deficient; the point is (numerically) on the critical set."""

    def __init__(self, x, sigma_min: float, sigma_max: float):
        self.x = np.asarray(x, dtype=float)
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        super().__init__(
            f"Df rank-deficient at x = {self.x.tolist()}: "
            f"sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e}"
        )


class DRegularityError(FiblabError):
    """The spherefication differential lost rank: a d-regularity failure witness."""

    def __init__(self, x, sigma_min: float, sigma_max: float):
        self.x = np.asarray(x, dtype=float)
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        super().__init__(
            f"spherefication differential rank-deficient at x = {self.x.tolist()}: "
            f"sigma_min = {sigma_min:.3e}"
        )


class SubcaseError(FiblabError):
    """Constrained lift system inconsistent: the point fails the generic-subcase
    test and must be reclassified."""

    def __init__(self, x, residual: float):
        self.x = np.asarray(x, dtype=float)
        self.residual = float(residual)
        super().__init__(
            f"restricted lift system inconsistent (residual {residual:.3e}) "
            f"at x = {self.x.tolist()}"
        )


class MuUndefinedError(FiblabError):
    """The collinearity coefficient mu has a vanishing denominator."""


class RefusalError(FiblabError):
    """A pipeline stage refused to run because a precondition verdict failed.

    Carries the witness report so callers can surface it.
    """

    def __init__(self, message: str, report=None, witness=None):
        self.report = report
        self.witness = witness
        super().__init__(message)
