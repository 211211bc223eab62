"""
Population quantities of a DGP, computed by quadrature and closed-form derivatives.

Every expectation over a kernel window is written in the scaled variable u = x / h,

    E[K_h(X) g(X)] = integral over [-1, 1] of K(u) g(h u) f_X(h u) du,

and integrated separately on [-1, 0] and [0, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from covariate_rdd.dgp import DgpSpec, PiecewisePolynomial
from covariate_rdd.errors import RangeError, SingularityError
from covariate_rdd.inference import weight_vector
from covariate_rdd.kernels import KernelSpec, constants, evaluate, kappa, moment, variance_constant
from covariate_rdd.local_fit import build_design, check_bandwidth
from covariate_rdd.quadrature import integrate_vector

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e10
PERTURBATION_SCALE = 0.5


@dataclass(frozen=True)
class CondMoments:
    mu_y: float
    mu_z: np.ndarray
    mu_zz: np.ndarray
    mu_zy: np.ndarray
    var_y: float


@dataclass(frozen=True)
class PopulationQuantities:
    theta0: np.ndarray
    gamma0: np.ndarray
    tilde_gamma: np.ndarray
    beta_check: np.ndarray
    bias_leading: float
    variance_leading: float
    tau_y: float
    sigma_l2: float
    sigma_r2: float


@dataclass(frozen=True)
class VarianceComparison:
    adjusted_sum: float
    baseline_sum: float
    gap: float
    objective_at_minimizer: float
    smallest_perturbed_objective: float
    minimizer_verified: bool


@dataclass(frozen=True)
class TaylorComparison:
    quadrature: np.ndarray
    prediction: np.ndarray

    @property
    def max_difference(self):
        return float(np.max(np.abs(self.quadrature - self.prediction)))


def _side_of(x):
    return "plus" if x >= 0 else "minus"


def _check_h(h):
    check_bandwidth(h)
    if h > 1:
        raise RangeError(f"h must lie in (0, 1], got {h!r}.")


def _solve(gram, rhs, what):
    condition = np.linalg.cond(gram)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularityError(f"Population {what} matrix is singular (condition estimate {condition:.3g}).")
    return np.linalg.solve(gram, rhs)


def cond_moments(dgp: DgpSpec, x: float, side: str | None = None) -> CondMoments:
    """Conditional moments at ``x``; at x = 0 the side of the one-sided limit must be given."""
    if side is None:
        if x == 0:
            raise RangeError("At the cutoff the side (plus or minus) of the limit must be given.")
        side = _side_of(x)
    gamma = dgp.gamma(side)
    mu_z = dgp.mu_z_at(x, side)
    mu_y = dgp.mu_y_at(x, side)
    return CondMoments(
        mu_y=mu_y,
        mu_z=mu_z,
        mu_zz=dgp.sigma_z + np.outer(mu_z, mu_z),
        mu_zy=dgp.sigma_z @ gamma + mu_z * mu_y,
        var_y=float(gamma @ dgp.sigma_z @ gamma + dgp.sigma_eps**2),
    )


def tilde_gamma(dgp: DgpSpec) -> np.ndarray:
    """Pooled one-sided projection loading (sigma2_Z- + sigma2_Z+)^-1 (sigma2_ZY- + sigma2_ZY+)."""
    cov_sum = np.zeros((dgp.p, dgp.p))
    cross_sum = np.zeros(dgp.p)
    for side in ("minus", "plus"):
        m = cond_moments(dgp, 0.0, side)
        cov_sum += m.mu_zz - np.outer(m.mu_z, m.mu_z)
        cross_sum += m.mu_zy - m.mu_z * m.mu_y
    if dgp.p == 0:
        return np.zeros(0)
    return _solve(cov_sum, cross_sum, "covariate covariance")


def _kernel_expectation(dgp, kernel, h, func, tol):
    def integrand(u):
        x = h * u
        return evaluate(kernel, u) * float(dgp.density.pdf(x)) * func(u, x)

    return _integrate(integrand, tol)


def _integrate(integrand, tol):
    return integrate_vector(integrand, -1.0, 1.0, tol=tol)


def population_coefficients(dgp: DgpSpec, kernel: KernelSpec, h: float, order: int = 1, *, tol=None):
    """Population regression coefficients (theta0(h), gamma0(h)) of the kernel-weighted problem."""
    _check_h(h)
    k = 2 * order + 2
    p = dgp.p
    size = k + p

    def block(u, x):
        side = _side_of(x)
        v = build_design(x, h, order)
        m = cond_moments(dgp, x, side)
        gram = np.zeros((size, size))
        gram[:k, :k] = np.outer(v, v)
        gram[:k, k:] = np.outer(v, m.mu_z)
        gram[k:, :k] = gram[:k, k:].T
        gram[k:, k:] = m.mu_zz
        rhs = np.concatenate([v * m.mu_y, m.mu_zy])
        return np.concatenate([gram.ravel(), rhs])

    values = _kernel_expectation(dgp, kernel, h, block, tol)
    gram = values[: size * size].reshape(size, size)
    rhs = values[size * size :]
    solution = _solve(gram, rhs, "design")
    logger.debug("Population fit %s, h=%g, order %d: theta0=%s", dgp.name, h, order, solution[:k])
    return solution[:k], solution[k:]


def m_matrix(dgp: DgpSpec, h: float, order: int = 1) -> np.ndarray:
    """Rows of coefficients such that M' V(x) is the side-wise Taylor polynomial of mu_Z at zero."""
    rows = [
        [mu.limit("plus") for mu in dgp.mu_z],
        [0.0] * dgp.p,
    ]
    for degree in range(1, order + 1):
        factorial = 1.0 if degree == 1 else 2.0
        minus = np.array([mu.limit("minus", degree) for mu in dgp.mu_z])
        plus = np.array([mu.limit("plus", degree) for mu in dgp.mu_z])
        rows.append(h**degree * minus / factorial)
        rows.append(h**degree * (plus - minus) / factorial)
    return np.array(rows, dtype=float).reshape(2 * order + 2, dgp.p)


def adjusted_covariate_means(dgp: DgpSpec, order: int = 1) -> tuple[PiecewisePolynomial, ...]:
    """Means of Z - M' V as piecewise polynomials (they do not depend on h)."""
    adjusted = []
    for mu in dgp.mu_z:
        sides = {}
        for side in ("minus", "plus"):
            taylor = [mu.limit("plus")] + [mu.limit(side, d) / (1.0 if d == 1 else 2.0) for d in range(1, order + 1)]
            sides[side] = mu.side(side) - Polynomial(taylor)
        adjusted.append(PiecewisePolynomial(sides["minus"], sides["plus"]))
    return tuple(adjusted)


def beta_check(dgp: DgpSpec, kernel: KernelSpec, h: float, order: int = 1, *, tol=None) -> np.ndarray:
    """E(K_h Z~ Z~')^-1 E(K_h Z~ Y) for the adjusted covariates Z~ = Z - M' V."""
    _check_h(h)
    p = dgp.p
    if p == 0:
        return np.zeros(0)
    adjusted = adjusted_covariate_means(dgp, order)

    def block(u, x):
        side = _side_of(x)
        m_tilde = np.array([mu.side(side)(x) for mu in adjusted])
        cross = dgp.sigma_z @ dgp.gamma(side) + m_tilde * dgp.mu_y_at(x, side)
        return np.concatenate([(dgp.sigma_z + np.outer(m_tilde, m_tilde)).ravel(), cross])

    values = _kernel_expectation(dgp, kernel, h, block, tol)
    return _solve(values[: p * p].reshape(p, p), values[p * p :], "adjusted covariate")


def _curvature_jump(plus: Polynomial, minus: Polynomial):
    return float(plus.deriv(2)(0.0) - minus.deriv(2)(0.0))


def leading_bias(dgp: DgpSpec, kernel: KernelSpec, order: int = 1, covariates: bool = True) -> float:
    """
    (C_B / 2) times the curvature jump of the adjusted outcome mean; zero for local quadratic fits.

    With ``covariates=False`` it is the bias of the fit that leaves Z out, driven by mu_Y itself.
    """
    if order == 2:
        return 0.0
    if order != 1:
        raise RangeError(f"order must be 1 or 2, got {order!r}.")
    gamma_tilde = tilde_gamma(dgp) if covariates else np.zeros(dgp.p)
    jump = _curvature_jump(
        dgp.outcome_polynomial("plus", adjust=gamma_tilde), dgp.outcome_polynomial("minus", adjust=gamma_tilde)
    )
    return constants(kernel).c_b / 2.0 * jump


def bias_conversion(dgp: DgpSpec, kernel: KernelSpec, h: float, *, tol=None) -> tuple[float, float]:
    """The leading bias written through beta_check and through the adjusted outcome, in that order."""
    beta = beta_check(dgp, kernel, h, tol=tol)
    outcome_jump = _curvature_jump(dgp.outcome_polynomial("plus"), dgp.outcome_polynomial("minus"))
    covariate_jumps = np.array([_curvature_jump(mu.plus, mu.minus) for mu in adjusted_covariate_means(dgp)])
    c_b = constants(kernel).c_b
    via_beta = c_b / 2.0 * (outcome_jump - covariate_jumps @ beta) if dgp.p else c_b / 2.0 * outcome_jump
    return float(via_beta), leading_bias(dgp, kernel)


def one_sided_variances(dgp: DgpSpec, gamma=None) -> tuple[float, float]:
    """Variances of Y - Z' gamma just left and right of the cutoff (gamma defaults to the pooled loading)."""
    gamma = tilde_gamma(dgp) if gamma is None else np.asarray(gamma, dtype=float)
    out = []
    for side in ("minus", "plus"):
        diff = dgp.gamma(side) - gamma
        out.append(float(diff @ dgp.sigma_z @ diff + dgp.sigma_eps**2))
    return out[0], out[1]


def leading_variance(dgp: DgpSpec, kernel: KernelSpec, order: int = 1, covariates: bool = True) -> float:
    sigma_l2, sigma_r2 = one_sided_variances(dgp, None if covariates else np.zeros(dgp.p))
    f0 = float(dgp.density.pdf(0.0))
    if order == 1:
        return constants(kernel).c_s / f0 * (sigma_l2 + sigma_r2)
    left = variance_constant(kernel, order, "minus")
    right = variance_constant(kernel, order, "plus")
    return (left * sigma_l2 + right * sigma_r2) / f0


def variance_comparison(dgp: DgpSpec, perturbations: int = 100, seed: int = 0) -> VarianceComparison:
    """Summed one-sided variances with and without the pooled adjustment, plus a minimizer check."""
    gamma_tilde = tilde_gamma(dgp)

    def objective(gamma):
        return sum(one_sided_variances(dgp, gamma))

    adjusted = objective(gamma_tilde)
    baseline = objective(np.zeros(dgp.p))
    rng = np.random.Generator(np.random.Philox(seed))
    perturbed = [
        objective(gamma_tilde + PERTURBATION_SCALE * rng.standard_normal(dgp.p)) for _ in range(perturbations)
    ]
    smallest = min(perturbed) if perturbed else adjusted
    return VarianceComparison(
        adjusted_sum=adjusted,
        baseline_sum=baseline,
        gap=baseline - adjusted,
        objective_at_minimizer=adjusted,
        smallest_perturbed_objective=smallest,
        minimizer_verified=adjusted <= smallest + 1e-12,
    )


def _residual_moment(dgp, coefficients, x, h, order):
    theta0, gamma0 = coefficients
    side = _side_of(x)
    diff = dgp.gamma(side) - gamma0
    mean_gap = dgp.mu_y_at(x, side) - build_design(x, h, order) @ theta0 - dgp.mu_z_at(x, side) @ gamma0
    return float(diff @ dgp.sigma_z @ diff + dgp.sigma_eps**2 + mean_gap**2)


def residual_second_moment(dgp: DgpSpec, kernel: KernelSpec, h: float, x: float, order: int = 1, *, tol=None):
    """E[r(h)^2 | X = x] for the population residual r(h) = Y - V' theta0(h) - Z' gamma0(h)."""
    coefficients = population_coefficients(dgp, kernel, h, order, tol=tol)
    return _residual_moment(dgp, coefficients, x, h, order)


def finite_bandwidth_variance(dgp: DgpSpec, kernel: KernelSpec, h: float, order: int = 1, *, tol=None) -> float:
    """h^-1 E[K(X/h)^2 (w'V)^2 r(h)^2] with w built from the population density at the cutoff."""
    coefficients = population_coefficients(dgp, kernel, h, order, tol=tol)
    w = weight_vector(kernel, float(dgp.density.pdf(0.0)), order)

    def integrand(u):
        x = h * u
        v = build_design(x, h, order)
        weight = evaluate(kernel, u) ** 2 * float(w @ v) ** 2
        return np.array([weight * _residual_moment(dgp, coefficients, x, h, order) * float(dgp.density.pdf(x))])

    return float(_integrate(integrand, tol)[0])


def _target_mean(dgp, target, index):
    if target == "Y":
        return PiecewisePolynomial(dgp.outcome_polynomial("minus"), dgp.outcome_polynomial("plus"))
    if target not in ("Z", "tilde_Z"):
        raise RangeError(f"target must be Y, Z or tilde_Z, got {target!r}.")
    if not 0 <= index < dgp.p:
        raise RangeError(f"covariate index {index} out of range for p={dgp.p}.")
    if target == "Z":
        return dgp.mu_z[index]
    return adjusted_covariate_means(dgp)[index]


def _product_derivative(dgp, poly, k):
    """k-th derivative of mu * f at zero from the side of ``poly`` (k <= 2)."""
    weights = {0: [1], 1: [1, 1], 2: [1, 2, 1]}[k]
    total = 0.0
    for j, binomial in enumerate(weights):
        mu_part = poly.deriv(k - j)(0.0) if k - j else poly(0.0)
        total += binomial * float(mu_part) * float(dgp.density.derivative(0.0, j))
    return total


def taylor_vector(dgp: DgpSpec, kernel: KernelSpec, h: float, target: str = "Y", index: int = 0, *, tol=None):
    """
    kappa(K)^-1 E[K_h V A] by quadrature next to its second-order expansion in h.

    ``target`` selects A: the outcome ``Y``, covariate ``Z`` number ``index`` (zero-based), or
    its adjusted version ``tilde_Z``.
    """
    _check_h(h)
    mean = _target_mean(dgp, target, index)
    inverse = kappa(kernel, 1).inverse

    def integrand(u, x):
        return build_design(x, h, 1) * float(mean(x))

    quadrature = inverse @ _kernel_expectation(dgp, kernel, h, integrand, tol)

    g = {side: [_product_derivative(dgp, mean.side(side), k) for k in range(3)] for side in ("minus", "plus")}
    first_order = np.array(
        [g["minus"][0], g["plus"][0] - g["minus"][0], h * g["minus"][1], h * (g["plus"][1] - g["minus"][1])]
    )
    k2p, k3p = moment(kernel, 2, "plus"), moment(kernel, 3, "plus")
    k2m, k3m = moment(kernel, 2, "minus"), moment(kernel, 3, "minus")
    curvature = np.array([k2p, k2p, k3p, k3p]) * g["plus"][2] + np.array([k2m, 0.0, k3m, 0.0]) * g["minus"][2]
    prediction = first_order + h**2 * 0.5 * inverse @ curvature
    return TaylorComparison(quadrature=quadrature, prediction=prediction)


def population_quantities(dgp: DgpSpec, kernel: KernelSpec, h: float, order: int = 1, *, tol=None):
    theta0, gamma0 = population_coefficients(dgp, kernel, h, order, tol=tol)
    sigma_l2, sigma_r2 = one_sided_variances(dgp)
    return PopulationQuantities(
        theta0=theta0,
        gamma0=gamma0,
        tilde_gamma=tilde_gamma(dgp),
        beta_check=beta_check(dgp, kernel, h, order, tol=tol),
        bias_leading=leading_bias(dgp, kernel, order),
        variance_leading=leading_variance(dgp, kernel, order),
        tau_y=dgp.tau_y,
        sigma_l2=sigma_l2,
        sigma_r2=sigma_r2,
    )


@dataclass(frozen=True)
class ChecklistItem:
    name: str
    passed: bool
    detail: str


def assumption_checklist(dgp: DgpSpec, kernel: KernelSpec, *, grid_size: int = 2001) -> list[ChecklistItem]:
    """
    Checks the regularity conditions the asymptotic results rely on.

    The moment exponent of the outcome and covariates is recorded as 1: every built-in and
    file-defined DGP has Gaussian noise, so all moments are finite.
    """
    items = []
    grid = np.linspace(-1.0, 1.0, grid_size)
    density = np.asarray(dgp.density.pdf(grid), dtype=float)
    items.append(
        ChecklistItem(
            "density_positive",
            bool(np.all(density > 0)),
            f"min f_X on [-1, 1] = {density.min():.6g}, f_X(0) = {float(dgp.density.pdf(0.0)):.6g}",
        )
    )
    gaps = [abs(mu.limit("plus") - mu.limit("minus")) for mu in dgp.mu_z]
    items.append(
        ChecklistItem("mu_z_continuous", all(g <= 1e-12 for g in gaps), f"largest jump {max(gaps, default=0.0):.3g}")
    )
    eigenvalues = np.linalg.eigvalsh(dgp.sigma_z) if dgp.p else np.zeros(0)
    items.append(
        ChecklistItem(
            "sigma_z_psd",
            bool(np.all(eigenvalues >= -1e-12)),
            f"smallest eigenvalue {eigenvalues.min() if dgp.p else 0.0:.6g}",
        )
    )
    # sigma^2_Z is the same on both sides because Sigma does not depend on X
    pooled = 2.0 * dgp.sigma_z
    condition = float(np.linalg.cond(pooled)) if dgp.p else 1.0
    items.append(
        ChecklistItem(
            "pooled_covariance_invertible",
            bool(np.isfinite(condition) and condition <= MAX_CONDITION),
            f"condition number {condition:.6g}",
        )
    )
    try:
        sigma_l2, sigma_r2 = one_sided_variances(dgp)
        variances_ok = sigma_l2 > 0 and sigma_r2 > 0
        detail = f"sigma_l^2 = {sigma_l2:.6g}, sigma_r^2 = {sigma_r2:.6g}"
    except SingularityError as e:
        variances_ok, detail = False, str(e)
    items.append(ChecklistItem("residual_variances_positive", variances_ok, detail))
    moments = kernel.moments
    finite = bool(np.all(np.isfinite(moments.k_plus)) and np.all(np.isfinite(moments.ksq_plus)))
    items.append(ChecklistItem("kernel_moments_finite", finite, f"kernel {kernel.name}"))
    items.append(ChecklistItem("moment_exponent", True, "delta = 1 (Gaussian noise)"))
    for item in items:
        if not item.passed:
            logger.warning("Assumption check %s failed: %s", item.name, item.detail)
    return items
