"""Adaptive quadrature helpers.

Integrands here are smooth on each side of zero but may have a kink (or a jump)
at zero, so every integral over an interval containing zero is split there.
"""

import logging

import numpy as np
from scipy import integrate

from covariate_rdd import settings

logger = logging.getLogger(__name__)

__all__ = ["integrate_scalar", "integrate_vector"]

RELATIVE_TOL = 1e-12


def _pieces(a, b, split):
    if a < split < b:
        return [(a, split), (split, b)]
    return [(a, b)]


def integrate_scalar(func, a, b, *, tol=None, split=0.0):
    """Integrates a scalar function over [a, b], splitting at ``split`` when it lies inside."""
    tol = settings.RDD_QUADRATURE_TOL if tol is None else tol
    total = 0.0
    for lo, hi in _pieces(a, b, split):
        value, error = integrate.quad(func, lo, hi, epsabs=tol, epsrel=RELATIVE_TOL, limit=200)
        if error > tol:
            logger.warning("Quadrature on [%g, %g] reported error %g above tolerance %g", lo, hi, error, tol)
        total += value
    return total


def integrate_vector(func, a, b, *, tol=None, split=0.0):
    """Integrates an array-valued function elementwise over [a, b], split like ``integrate_scalar``."""
    tol = settings.RDD_QUADRATURE_TOL if tol is None else tol
    total = None
    for lo, hi in _pieces(a, b, split):
        value, error = integrate.quad_vec(func, lo, hi, epsabs=tol, epsrel=RELATIVE_TOL, norm="max", limit=2000)
        if error > tol:
            logger.warning("Vector quadrature on [%g, %g] reported error %g above tolerance %g", lo, hi, error, tol)
        total = np.asarray(value, dtype=float) if total is None else total + value
    return total
