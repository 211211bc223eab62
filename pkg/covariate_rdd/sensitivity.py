"""
Sensitivity of the effect estimate to confounding.

For a threshold tau_bar > 0 and a confounding level delta > 0, the joint hypothesis
H0(delta) says the true effect is at most tau_bar while the outcome disturbance jumps by
at most delta at the cutoff. H0(delta) is rejected when tau_bar lies outside the one-sided
interval (tau_hat - delta - q_{1-alpha} se, inf). The rejected levels form (0, delta_hat].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from covariate_rdd.errors import RangeError
from covariate_rdd.inference import InferenceSummary, check_alpha, ci_lower_confounded, normal_quantile
from covariate_rdd.local_fit import FitResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SensitivityResult:
    tau_hat: float
    tau_bar: float
    alpha: float
    se_tau: float
    delta_hat: float

    @property
    def rejects_any(self):
        return self.delta_hat > 0

    @property
    def rejection_region(self):
        """(0, delta_hat] as a pair, or None when no confounding level is rejected."""
        return (0.0, self.delta_hat) if self.rejects_any else None


@dataclass(frozen=True)
class SensitivityCurveRow:
    tau_bar: float
    delta_hat: float
    no_rejection: bool


def delta_hat(tau_hat, tau_bar, se_tau, alpha=0.05) -> float:
    check_alpha(alpha)
    if se_tau < 0:
        raise RangeError(f"se_tau must be non-negative, got {se_tau!r}.")
    if tau_bar <= 0:
        raise RangeError(f"tau_bar must be positive, got {tau_bar!r}.")
    return tau_hat - tau_bar - normal_quantile(1.0 - alpha) * se_tau


def analyze(tau_hat, tau_bar, se_tau, alpha=0.05) -> SensitivityResult:
    value = delta_hat(tau_hat, tau_bar, se_tau, alpha)
    if value <= 0:
        logger.info("No confounding level is rejected for tau_bar=%g (delta_hat=%.6g)", tau_bar, value)
    return SensitivityResult(tau_hat=tau_hat, tau_bar=tau_bar, alpha=alpha, se_tau=se_tau, delta_hat=value)


def reject(delta, sensitivity: SensitivityResult) -> bool:
    """Whether H0(delta) is rejected; the boundary delta = delta_hat is included."""
    if delta <= 0:
        raise RangeError(f"delta must be positive, got {delta!r}.")
    return delta <= sensitivity.delta_hat


def reject_by_interval(delta, tau_bar, tau_hat, s2_hat, n, h, alpha=0.05) -> bool:
    """The same decision taken directly from the confounding-shifted interval: reject when tau_bar is outside it."""
    if delta <= 0:
        raise RangeError(f"delta must be positive, got {delta!r}.")
    return tau_bar <= ci_lower_confounded(tau_hat, delta, s2_hat, n, h, alpha)


def sensitivity_curve(fit: FitResult, summary: InferenceSummary, tau_bar_grid, alpha=0.05):
    grid = np.asarray(tau_bar_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise RangeError("tau_bar grid must be a non-empty list of values.")
    if np.any(grid <= 0):
        raise RangeError("tau_bar grid values must all be positive.")
    if np.any(np.diff(grid) <= 0):
        raise RangeError("tau_bar grid must be strictly increasing.")
    rows = []
    for tau_bar in grid:
        value = delta_hat(fit.tau_hat, float(tau_bar), summary.se_tau, alpha)
        rows.append(SensitivityCurveRow(tau_bar=float(tau_bar), delta_hat=value, no_rejection=value <= 0))
    return rows
