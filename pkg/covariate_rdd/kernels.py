"""Kernels on [-1, 1], their one-sided moments, the kappa matrices and the bias/variance constants.

Notation: ``K_+^(a)`` is the integral of ``K(u) u**a`` over [0, 1], ``K_-^(a)`` the same over
[-1, 0] and ``K^(a)`` their sum. Squared-kernel moments ``(K^2)_+^(a)`` are defined likewise.
"""

from __future__ import annotations

import functools
import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from covariate_rdd.errors import InvalidKernelError, RangeError, SingularityError
from covariate_rdd.quadrature import integrate_scalar

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("triangular", "epanechnikov", "uniform", "custom")
SIDES = ("plus", "minus", "full")
MAX_ALPHA = 6
MAX_SQ_ALPHA = 2
MAX_CONDITION = 1e10
VALIDATION_GRID = 10_000
UNIT_MASS_TOL = 1e-10
SYMMETRY_TOL = 1e-10


def _plus_moment_closed_form(kind, alpha):
    a = alpha
    if kind == "triangular":
        return 1.0 / ((a + 1) * (a + 2))
    if kind == "epanechnikov":
        return 0.75 * (1.0 / (a + 1) - 1.0 / (a + 3))
    return 0.5 / (a + 1)


def _plus_sq_moment_closed_form(kind, alpha):
    a = alpha
    if kind == "triangular":
        return 2.0 / ((a + 1) * (a + 2) * (a + 3))
    if kind == "epanechnikov":
        return 9.0 / 16.0 * (1.0 / (a + 1) - 2.0 / (a + 3) + 1.0 / (a + 5))
    return 0.25 / (a + 1)


def _builtin_values(kind, u):
    inside = np.abs(u) <= 1.0
    if kind == "triangular":
        values = 1.0 - np.abs(u)
    elif kind == "epanechnikov":
        values = 0.75 * (1.0 - u**2)
    else:
        values = np.full_like(u, 0.5)
    return np.where(inside, values, 0.0)


def _readonly(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class KernelMoments:
    """Cached one-sided moments; ``order`` is the highest local polynomial order they support."""

    k_plus: np.ndarray
    k_minus: np.ndarray
    k_full: np.ndarray
    ksq_plus: np.ndarray
    ksq_minus: np.ndarray
    order: int = 2


@dataclass(frozen=True)
class KappaMatrix:
    entries: np.ndarray
    inverse: np.ndarray
    det: float
    order: int


@dataclass(frozen=True)
class KernelConstants:
    c_b: float
    c_s: float
    a1: float
    a2: float
    b1: float
    b2: float


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """
    A kernel supported on [-1, 1].

    Built-in kinds use closed-form moments. A ``custom`` kernel wraps an ``evaluator``
    (any callable ``u -> weight``) which is validated numerically on construction:
    non-negative and finite on a 10**4-point grid, symmetric, and integrating to one.
    Its moments are then computed by adaptive quadrature.
    """

    kind: str
    evaluator: Callable[[float], float] | None = None
    label: str | None = None
    moments: KernelMoments = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise InvalidKernelError(f"Unknown kernel kind '{self.kind}'. Expected one of {', '.join(KERNEL_KINDS)}.")
        if self.kind == "custom":
            if self.evaluator is None or not callable(self.evaluator):
                raise InvalidKernelError("A custom kernel needs a callable evaluator.")
            self._validate_custom()
        elif self.evaluator is not None:
            raise InvalidKernelError("Only custom kernels take an evaluator.")
        object.__setattr__(self, "moments", self._compute_moments())

    @property
    def name(self):
        if self.kind == "custom":
            return self.label or "custom"
        return self.kind

    @property
    def support(self):
        return (-1.0, 1.0)

    def __call__(self, u):
        return evaluate(self, u)

    def _raw(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind != "custom":
            return _builtin_values(self.kind, u)
        flat = np.atleast_1d(u).ravel()
        out = np.zeros_like(flat)
        inside = np.abs(flat) <= 1.0
        if np.any(inside):
            values = np.array([float(self.evaluator(float(v))) for v in flat[inside]])
            if not np.all(np.isfinite(values)):
                raise InvalidKernelError(f"Kernel {self.name} returned a non-finite value.")
            if np.any(values < 0):
                raise InvalidKernelError(f"Kernel {self.name} returned a negative value.")
            out[inside] = values
        return out.reshape(u.shape)

    def _validate_custom(self):
        grid = np.linspace(-1.0, 1.0, VALIDATION_GRID)
        values = self._raw(grid)
        asymmetry = np.max(np.abs(values - values[::-1]))
        if asymmetry > SYMMETRY_TOL:
            raise InvalidKernelError(f"Kernel {self.name} is not symmetric (max |K(u) - K(-u)| = {asymmetry:.3g}).")
        mass = integrate_scalar(lambda u: float(self._raw(u)), -1.0, 1.0)
        if abs(mass - 1.0) > UNIT_MASS_TOL:
            raise InvalidKernelError(f"Kernel {self.name} integrates to {mass:.12g}, not one.")
        logger.debug("Validated custom kernel %s", self.name)

    def _compute_moments(self):
        alphas = range(MAX_ALPHA + 1)
        sq_alphas = range(MAX_SQ_ALPHA + 1)
        if self.kind == "custom":
            k_plus = [integrate_scalar(lambda u, a=a: float(self._raw(u)) * u**a, 0.0, 1.0) for a in alphas]
            ksq_plus = [integrate_scalar(lambda u, a=a: float(self._raw(u)) ** 2 * u**a, 0.0, 1.0) for a in sq_alphas]
        else:
            k_plus = [_plus_moment_closed_form(self.kind, a) for a in alphas]
            ksq_plus = [_plus_sq_moment_closed_form(self.kind, a) for a in sq_alphas]
        k_plus = np.array(k_plus)
        ksq_plus = np.array(ksq_plus)
        # symmetry gives the minus side
        k_minus = k_plus * (-1.0) ** np.arange(MAX_ALPHA + 1)
        ksq_minus = ksq_plus * (-1.0) ** np.arange(MAX_SQ_ALPHA + 1)
        return KernelMoments(
            k_plus=_readonly(k_plus),
            k_minus=_readonly(k_minus),
            k_full=_readonly(k_plus + k_minus),
            ksq_plus=_readonly(ksq_plus),
            ksq_minus=_readonly(ksq_minus),
        )


TRIANGULAR = KernelSpec("triangular")
EPANECHNIKOV = KernelSpec("epanechnikov")
UNIFORM = KernelSpec("uniform")

_BUILTINS = {k.kind: k for k in (TRIANGULAR, EPANECHNIKOV, UNIFORM)}


def get_kernel(name: str) -> KernelSpec:
    """Returns the shared built-in kernel of that name."""
    try:
        return _BUILTINS[name]
    except KeyError:
        raise InvalidKernelError(
            f"Unknown kernel '{name}'. Built-in kernels are {', '.join(_BUILTINS)}; use a plug-in path for custom."
        ) from None


def evaluate(kernel: KernelSpec, u):
    """
    Kernel weight K(u).

    Parameters
    ----------
    kernel : KernelSpec
    u : float or array_like
        Any real value(s); points outside [-1, 1] get weight zero.

    Returns
    -------
    float or numpy.ndarray
        Same shape as ``u``.
    """
    values = kernel._raw(u)
    if np.ndim(values) == 0:
        return float(values)
    return values


def _check_alpha(alpha, limit):
    if isinstance(alpha, bool) or not isinstance(alpha, (int, np.integer)) or not 0 <= alpha <= limit:
        raise RangeError(f"alpha must be an integer between 0 and {limit}, got {alpha!r}.")


def moment(kernel: KernelSpec, alpha: int, side: str = "full") -> float:
    _check_alpha(alpha, MAX_ALPHA)
    m = kernel.moments
    if side == "plus":
        return float(m.k_plus[alpha])
    if side == "minus":
        return float(m.k_minus[alpha])
    if side == "full":
        return float(m.k_full[alpha])
    raise RangeError(f"side must be one of {', '.join(SIDES)}, got {side!r}.")


def sq_moment(kernel: KernelSpec, alpha: int, side: str = "plus") -> float:
    _check_alpha(alpha, MAX_SQ_ALPHA)
    m = kernel.moments
    if side == "plus":
        return float(m.ksq_plus[alpha])
    if side == "minus":
        return float(m.ksq_minus[alpha])
    raise RangeError(f"side must be plus or minus, got {side!r}.")


def design_layout(order: int):
    """Powers and treatment flags of the design entries (1, T, u, Tu[, u^2, Tu^2])."""
    if order not in (1, 2):
        raise RangeError(f"order must be 1 or 2, got {order!r}.")
    powers = np.repeat(np.arange(order + 1), 2)
    treated = np.tile([False, True], order + 1)
    return powers, treated


@functools.lru_cache(maxsize=None)
def kappa(kernel: KernelSpec, order: int = 1) -> KappaMatrix:
    """Assembles kappa(K): entry (i, j) is K_+^(p_i + p_j) when either entry is treated, K^(p_i + p_j) otherwise."""
    powers, treated = design_layout(order)
    m = kernel.moments
    size = len(powers)
    entries = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            alpha = powers[i] + powers[j]
            entries[i, j] = m.k_plus[alpha] if (treated[i] or treated[j]) else m.k_full[alpha]
    det = float(np.linalg.det(entries))
    if det == 0.0 or np.linalg.cond(entries) > MAX_CONDITION:
        raise SingularityError(f"kappa matrix of order {order} for kernel {kernel.name} is singular.")
    return KappaMatrix(entries=_readonly(entries), inverse=_readonly(np.linalg.inv(entries)), det=det, order=order)


def kappa_inverse_closed_form(kernel: KernelSpec) -> np.ndarray:
    """Explicit inverse of the order-1 kappa matrix."""
    k1 = moment(kernel, 1, "plus")
    k2 = moment(kernel, 2, "plus")
    scale = 1.0 / (k1**2 - 0.5 * k2)
    body = np.array(
        [
            [-k2, k2, -k1, k1],
            [k2, -2.0 * k2, k1, 0.0],
            [-k1, k1, -0.5, 0.5],
            [k1, 0.0, 0.5, -1.0],
        ]
    )
    return _readonly(scale * body)


def constants(kernel: KernelSpec) -> KernelConstants:
    m = kernel.moments
    k1, k2, k3, k4 = m.k_plus[1], m.k_plus[2], m.k_plus[3], m.k_plus[4]
    s0, s1, s2 = m.ksq_plus[0], m.ksq_plus[1], m.ksq_plus[2]
    denom = k2 - 2.0 * k1**2
    c_b = (2.0 * k2**2 - 2.0 * k1 * k3) / denom
    c_s = (s0 * k2**2 + s2 * k1**2 - 2.0 * s1 * k2 * k1) / (k1**2 - 0.5 * k2) ** 2
    return KernelConstants(
        c_b=float(c_b),
        c_s=float(c_s),
        a1=float((2.0 * k2**2 - 2.0 * k1 * k3) / denom),
        a2=float((k3 - 2.0 * k1 * k2) / denom),
        b1=float((2.0 * k2 * k3 - 2.0 * k1 * k4) / denom),
        b2=float((k4 - 2.0 * k1 * k3) / denom),
    )


@functools.lru_cache(maxsize=None)
def variance_constant(kernel: KernelSpec, order: int = 1, side: str = "minus", tol: float | None = None) -> float:
    """
    One-sided variance constant, the integral of K(y)^2 ([kappa^-1]_2 . V(y))^2 over one side.

    For order 1 this equals C_S on either side; for order 2 it is the constant that
    replaces C_S in the leading variance of the local quadratic fit.
    """
    powers, treated = design_layout(order)
    row = kappa(kernel, order).inverse[1]
    if side == "minus":
        mask = ~treated
        lo, hi = -1.0, 0.0
    elif side == "plus":
        mask = np.ones_like(treated)
        lo, hi = 0.0, 1.0
    else:
        raise RangeError(f"side must be plus or minus, got {side!r}.")

    def integrand(y):
        design = np.where(mask, y**powers, 0.0)
        return evaluate(kernel, y) ** 2 * float(row @ design) ** 2

    return integrate_scalar(integrand, lo, hi, tol=tol)
