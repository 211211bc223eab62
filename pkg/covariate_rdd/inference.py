"""Plug-in inference for the jump estimate: density at the cutoff, weight vector, variance and intervals."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from covariate_rdd.errors import InsufficientSupportError, InvalidDensityError, RangeError, SingularityError
from covariate_rdd.kernels import KernelSpec, evaluate, kappa, kappa_inverse_closed_form
from covariate_rdd.local_fit import Dataset, FitResult, check_bandwidth

logger = logging.getLogger(__name__)

VARIANCE_METHODS = ("sample", "asymptotic")
MIN_RESIDUAL_SHARE = 1e-10
UNDERSMOOTHING_NOTE = (
    "Intervals assume undersmoothing (n*h^5 -> 0) and apply no bias correction; "
    "the h^2 bias term is treated as negligible."
)


@dataclass(frozen=True, eq=False)
class InferenceSummary:
    tau_hat: float
    f_hat: float
    w: np.ndarray
    s2_hat: float
    se_tau: float
    ci_low: float
    ci_high: float
    alpha: float
    n: int
    h: float
    variance_method: str = "sample"


def check_alpha(alpha):
    if not 0 < alpha < 1:
        raise RangeError(f"alpha must lie strictly between 0 and 1, got {alpha!r}.")


def normal_quantile(prob: float) -> float:
    return float(stats.norm.ppf(prob))


def density_at_cutoff(x, kernel: KernelSpec, h: float, cutoff: float = 0.0) -> float:
    """Kernel density estimate (nh)^-1 sum K((x_i - c)/h) at the cutoff."""
    check_bandwidth(h)
    x = np.asarray(x, dtype=float)
    values = evaluate(kernel, (x - cutoff) / h)
    if not np.any(values > 0):
        raise InsufficientSupportError(f"No observations within h={h:g} of the cutoff; cannot estimate the density.")
    return float(np.sum(values) / (len(x) * h))


def weight_vector(kernel: KernelSpec, f_hat: float, order: int = 1) -> np.ndarray:
    """Second row of (f_hat kappa(K))^-1, as a vector."""
    if not np.isfinite(f_hat) or f_hat <= 0:
        raise InvalidDensityError(f"f_hat must be positive, got {f_hat!r}.")
    inverse = kappa_inverse_closed_form(kernel) if order == 1 else kappa(kernel, order).inverse
    return np.array(inverse[1]) / f_hat


def variance_hat(fit: FitResult, kernel: KernelSpec | None = None, f_hat: float | None = None, *, method="sample"):
    """
    Plug-in estimate of S^2, the variance of sqrt(nh) (tau_hat - tau).

    ``sample`` uses the linear weights a_i of tau_hat in the fitted sample (the second row of the
    sample Gram inverse, covariates included) with leverage-corrected residuals:
    nh sum a_i^2 r_i^2 / (1 - H_ii).
    ``asymptotic`` uses the weight vector of (f_hat kappa(K))^-1 and raw residuals:
    (nh)^-1 sum K(u_i)^2 (w'V_i)^2 r_i^2.
    Both converge to S^2; only ``asymptotic`` needs ``kernel`` and ``f_hat``.
    """
    if method == "asymptotic":
        if kernel is None or f_hat is None:
            raise RangeError("The asymptotic variance needs the kernel and f_hat.")
        w = weight_vector(kernel, f_hat, fit.order)
        terms = fit.kernel_values**2 * (fit.design @ w) ** 2 * fit.residuals**2
        return float(np.sum(terms) / (fit.n * fit.h))
    if method != "sample":
        raise RangeError(f"variance method must be one of {', '.join(VARIANCE_METHODS)}, got {method!r}.")
    used = fit.jump_weights != 0
    if np.any(fit.leverage[used] >= 1.0 - MIN_RESIDUAL_SHARE):
        raise SingularityError("An observation in the window has leverage one; the plug-in variance is undefined.")
    terms = fit.jump_weights[used] ** 2 * fit.residuals[used] ** 2 / (1.0 - fit.leverage[used])
    return float(fit.n * fit.h * np.sum(terms))


def standard_error(s2_hat, n, h):
    if s2_hat < 0:
        raise RangeError(f"s2_hat must be non-negative, got {s2_hat!r}.")
    return float(np.sqrt(s2_hat / (n * h)))


def confidence_interval(tau_hat, s2_hat, n, h, alpha=0.05, *, bias=0.0):
    """Two-sided interval tau_hat - bias -/+ q_{1-alpha/2} sqrt(s2_hat/(nh)); ``bias`` is for simulation use."""
    check_alpha(alpha)
    half_width = normal_quantile(1.0 - alpha / 2.0) * standard_error(s2_hat, n, h)
    centre = tau_hat - bias
    return centre - half_width, centre + half_width


def ci_lower_confounded(tau_hat, delta, s2_hat, n, h, alpha=0.05):
    """Lower end of the one-sided interval (tau_hat - delta - q_{1-alpha} se, inf)."""
    check_alpha(alpha)
    if delta < 0:
        raise RangeError(f"delta must be non-negative, got {delta!r}.")
    return tau_hat - delta - normal_quantile(1.0 - alpha) * standard_error(s2_hat, n, h)


def summarize(
    data: Dataset, fit: FitResult, kernel: KernelSpec, alpha=0.05, density_bandwidth=None, variance_method="sample"
):
    """
    Full plug-in inference for a fit.

    The density at the cutoff uses the fit's kernel and bandwidth unless an independent
    ``density_bandwidth`` is given.
    """
    check_alpha(alpha)
    h_density = fit.h if density_bandwidth is None else density_bandwidth
    f_hat = density_at_cutoff(data.x, kernel, h_density, data.cutoff)
    w = weight_vector(kernel, f_hat, fit.order)
    s2_hat = variance_hat(fit, kernel, f_hat, method=variance_method)
    se_tau = standard_error(s2_hat, fit.n, fit.h)
    low, high = confidence_interval(fit.tau_hat, s2_hat, fit.n, fit.h, alpha)
    logger.debug("f_hat=%.6g s2_hat=%.6g se=%.6g", f_hat, s2_hat, se_tau)
    return InferenceSummary(
        tau_hat=fit.tau_hat,
        f_hat=f_hat,
        w=w,
        s2_hat=s2_hat,
        se_tau=se_tau,
        ci_low=low,
        ci_high=high,
        alpha=alpha,
        n=fit.n,
        h=fit.h,
        variance_method=variance_method,
    )
