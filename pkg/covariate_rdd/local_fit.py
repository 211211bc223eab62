"""Kernel-weighted local polynomial least squares with covariates."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from covariate_rdd.errors import (
    IngestionError,
    InsufficientSupportError,
    InvalidBandwidthError,
    OneSidedDataError,
    RangeError,
    SingularDesignError,
)
from covariate_rdd.kernels import KernelSpec, evaluate

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e10
DESIGN_NAMES = ("intercept", "jump", "slope", "slope_jump", "curvature", "curvature_jump")


def _frozen(values):
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """The sample (y_i, x_i, z_i) together with the cutoff of the running variable."""

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray | None = None
    cutoff: float = 0.0

    def __post_init__(self):
        y = _frozen(self.y)
        x = _frozen(self.x)
        z = np.empty((len(y), 0)) if self.z is None else np.array(self.z, dtype=float)
        if z.ndim == 1:
            z = z.reshape(-1, 1)
        z.setflags(write=False)
        if y.ndim != 1 or x.ndim != 1 or z.ndim != 2:
            raise IngestionError("y and x must be vectors and z a matrix.")
        if not len(y) == len(x) == z.shape[0]:
            raise IngestionError(f"Row counts differ: y has {len(y)}, x has {len(x)}, z has {z.shape[0]}.")
        for label, values in (("y", y), ("x", x), ("z", z)):
            if not np.all(np.isfinite(values)):
                raise IngestionError(f"{label} contains non-finite values.")
        if not np.isfinite(self.cutoff):
            raise IngestionError("cutoff must be finite.")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "cutoff", float(self.cutoff))

    @property
    def n(self):
        return len(self.y)

    @property
    def p(self):
        return self.z.shape[1]

    @property
    def x_shifted(self):
        return self.x - self.cutoff


@dataclass(frozen=True, eq=False)
class FitResult:
    order: int
    h: float
    theta: np.ndarray
    gamma: np.ndarray
    residuals: np.ndarray
    effective_n_left: int
    effective_n_right: int
    condition_estimate: float
    n: int
    # design rows V_i and kernel values K(x_i / h) for every observation
    design: np.ndarray
    kernel_values: np.ndarray
    # tau_hat = jump_weights @ y; both vectors are 0 outside the window
    jump_weights: np.ndarray
    leverage: np.ndarray

    @property
    def tau_hat(self):
        return float(self.theta[1])


def check_bandwidth(h):
    if not np.isfinite(h) or h <= 0:
        raise InvalidBandwidthError(f"h must be positive, got {h!r}.")


def build_design(x_shifted, h: float, order: int = 1) -> np.ndarray:
    """
    Local polynomial design row(s) at running-variable value(s) already shifted by the cutoff.

    Order 1 gives (1, T, x/h, T x/h) and order 2 appends ((x/h)^2, T (x/h)^2), with T = 1[x >= 0].
    A scalar input returns one row, an array of length n returns an n-by-(2 order + 2) matrix.
    """
    check_bandwidth(h)
    if order not in (1, 2):
        raise RangeError(f"order must be 1 or 2, got {order!r}.")
    x = np.asarray(x_shifted, dtype=float)
    u = x / h
    t = (x >= 0).astype(float)
    columns = [np.ones_like(u), t]
    for power in range(1, order + 1):
        columns.extend([u**power, t * u**power])
    return np.stack(columns, axis=-1)


def min_support(order):
    return max(order + 2, 3)


def _column_names(order, p):
    return list(DESIGN_NAMES[: 2 * order + 2]) + [f"z{k + 1}" for k in range(p)]


def _solve_weighted(design, covariates, y, weights, names, *, influence=False):
    """
    Returns (coefficients, condition estimate, influence) for the weighted problem on positive-weight rows.

    With ``influence`` the third item is (kept rows, linear weights, leverages): coefficient j equals
    linear[j] @ y[kept] and the leverages are the diagonal of the weighted hat matrix. Otherwise it is None.
    """
    regressors = np.hstack([design, covariates]) if covariates.size else np.asarray(design, dtype=float)
    k = regressors.shape[1]
    positive = weights > 0
    if positive.sum() < k:
        raise InsufficientSupportError(f"Need at least {k} observations with positive weight, found {positive.sum()}.")

    root_w = np.sqrt(weights[positive])
    a = regressors[positive] * root_w[:, None]
    b = y[positive] * root_w
    scale = np.linalg.norm(a, axis=0)
    empty = [names[j] for j in np.flatnonzero(scale == 0)]
    if empty:
        raise SingularDesignError(f"Design columns with no variation in the window: {', '.join(empty)}.", empty)
    q, r, piv = linalg.qr(a / scale, mode="economic", pivoting=True)
    condition = float(np.linalg.cond(r) ** 2)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        diag = np.abs(np.diag(r))
        weak = np.flatnonzero(diag <= diag[0] / np.sqrt(MAX_CONDITION))
        offending = [names[piv[j]] for j in weak] or [names[piv[-1]]]
        raise SingularDesignError(
            f"Weighted design is singular (condition estimate {condition:.3g}); "
            f"offending columns: {', '.join(offending)}.",
            offending,
        )
    coef_pivoted = linalg.solve_triangular(r, q.T @ b)
    coef = np.empty(k)
    coef[piv] = coef_pivoted
    coef /= scale
    if not influence:
        return coef, condition, None
    linear = np.empty((k, len(b)))
    linear[piv] = linalg.solve_triangular(r, q.T)
    linear *= root_w[None, :] / scale[:, None]
    leverage = np.sum(q**2, axis=1)
    return coef, condition, (positive, linear, leverage)


def wls_solve(design, covariates, y, weights) -> tuple[np.ndarray, np.ndarray]:
    """
    Minimizes sum_i w_i (y_i - V_i' theta - Z_i' gamma)^2.

    Zero-weight rows are dropped, the remaining rows are scaled by sqrt(w_i) and the problem is
    solved by a column-pivoted QR decomposition of the column-equilibrated design.
    """
    design = np.atleast_2d(np.asarray(design, dtype=float))
    n = design.shape[0]
    covariates = np.empty((n, 0)) if covariates is None else np.asarray(covariates, dtype=float).reshape(n, -1)
    y = np.asarray(y, dtype=float)
    weights = np.asarray(weights, dtype=float)
    names = list(DESIGN_NAMES[: design.shape[1]]) + [f"z{j + 1}" for j in range(covariates.shape[1])]
    coef, _, _ = _solve_weighted(design, covariates, y, weights, names)
    return coef[: design.shape[1]], coef[design.shape[1] :]


def _window(data, kernel, h, order):
    check_bandwidth(h)
    x = data.x_shifted
    kernel_values = evaluate(kernel, x / h)
    in_window = kernel_values > 0
    left = int(np.sum(in_window & (x < 0)))
    right = int(np.sum(in_window & (x >= 0)))
    logger.debug("Window h=%g holds %d left and %d right observations", h, left, right)
    if left == 0 or right == 0:
        side = "left" if left == 0 else "right"
        raise OneSidedDataError(f"No observations with positive kernel weight on the {side} of the cutoff (h={h:g}).")
    needed = min_support(order)
    if left < needed or right < needed:
        raise InsufficientSupportError(
            f"Order-{order} fit needs at least {needed} observations per side inside the window; "
            f"found {left} left and {right} right (h={h:g})."
        )
    return kernel_values, left, right


def estimate(data: Dataset, kernel: KernelSpec, h: float, order: int = 1) -> FitResult:
    """Covariate-adjusted local polynomial estimate of the jump at the cutoff."""
    design = build_design(data.x_shifted, h, order)
    kernel_values, left, right = _window(data, kernel, h, order)
    weights = kernel_values / h
    names = _column_names(order, data.p)
    coef, condition, (kept, linear, leverage_kept) = _solve_weighted(
        design, data.z, data.y, weights, names, influence=True
    )
    k = design.shape[1]
    theta, gamma = coef[:k], coef[k:]
    residuals = np.where(kernel_values > 0, data.y - design @ theta - data.z @ gamma, 0.0)
    jump_weights = np.zeros(data.n)
    jump_weights[kept] = linear[1]
    leverage = np.zeros(data.n)
    leverage[kept] = leverage_kept
    logger.debug("Fit order %d, h=%g: tau_hat=%.6g, condition %.3g", order, h, theta[1], condition)
    return FitResult(
        order=order,
        h=float(h),
        theta=_frozen(theta),
        gamma=_frozen(gamma),
        residuals=_frozen(residuals),
        effective_n_left=left,
        effective_n_right=right,
        condition_estimate=condition,
        n=data.n,
        design=_frozen(design),
        kernel_values=_frozen(kernel_values),
        jump_weights=_frozen(jump_weights),
        leverage=_frozen(leverage),
    )


def _residualize(target, covariates, weights, names):
    """Weighted least-squares residuals of ``target`` after regressing it on ``covariates``."""
    coef, _, _ = _solve_weighted(np.empty((len(target), 0)), covariates, target, weights, names)
    return target - covariates @ coef


def estimate_fwl(data: Dataset, kernel: KernelSpec, h: float, order: int = 1) -> float:
    """The same jump estimate computed by partitioned regression: residualize y and V on Z, then regress."""
    if data.p == 0:
        return estimate(data, kernel, h, order).tau_hat
    design = build_design(data.x_shifted, h, order)
    kernel_values, _, _ = _window(data, kernel, h, order)
    keep = kernel_values > 0
    weights = kernel_values[keep] / h
    z = data.z[keep]
    names = [f"z{k + 1}" for k in range(data.p)]
    v_tilde = np.column_stack([_residualize(column, z, weights, names) for column in design[keep].T])
    root_w = np.sqrt(weights)
    before = np.linalg.norm(design[keep] * root_w[:, None], axis=0)
    after = np.linalg.norm(v_tilde * root_w[:, None], axis=0)
    lost = [DESIGN_NAMES[j] for j in np.flatnonzero(after**2 * MAX_CONDITION <= before**2)]
    if lost:
        raise SingularDesignError(f"Design columns explained by the covariates: {', '.join(lost)}.", lost)
    y_tilde = _residualize(data.y[keep], z, weights, names)
    theta, _ = wls_solve(v_tilde, None, y_tilde, weights)
    return float(theta[1])
