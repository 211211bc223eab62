"""
Analytic data-generating processes.

A DGP draws X from a density on [-1, 1], covariates Z = mu_Z(X) + Sigma^(1/2) e with
piecewise-polynomial mu_Z, and the outcome

    Y = side_poly(X) + Z' gamma_side + sigma_eps * eps (+ confound_shift on the treated side),

with side_poly = p_poly and gamma_side = gamma_plus for X >= 0, q_poly and gamma_minus otherwise.
All conditional moments and one-sided derivatives are available in closed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import environ
import numpy as np
from django.core.exceptions import ImproperlyConfigured
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite_e import hermeval
from scipy import stats

from covariate_rdd.errors import IngestionError, InvalidDgpError, RangeError

logger = logging.getLogger(__name__)

SUPPORT = (-1.0, 1.0)
CONTINUITY_TOL = 1e-12
PSD_TOL = 1e-12


class UniformDensity:
    name = "uniform"

    def __init__(self):
        low, high = SUPPORT
        self.distribution = stats.uniform(loc=low, scale=high - low)

    @property
    def params(self):
        return {}

    def pdf(self, x):
        return self.distribution.pdf(x)

    def derivative(self, x, k):
        """k-th derivative of the pdf at interior points."""
        return self.pdf(x) if k == 0 else np.zeros_like(np.asarray(x, dtype=float))

    def ppf(self, q):
        return self.distribution.ppf(q)


class TruncatedNormalDensity:
    name = "truncnorm"

    def __init__(self, loc=0.0, scale=1.0):
        if scale <= 0:
            raise InvalidDgpError(f"X_SCALE must be positive, got {scale!r}.")
        self.loc = float(loc)
        self.scale = float(scale)
        low, high = SUPPORT
        self.distribution = stats.truncnorm(
            (low - self.loc) / self.scale, (high - self.loc) / self.scale, loc=self.loc, scale=self.scale
        )

    @property
    def params(self):
        return {"X_LOC": self.loc, "X_SCALE": self.scale}

    def pdf(self, x):
        return self.distribution.pdf(x)

    def derivative(self, x, k):
        # f^(k) = (-1)^k He_k(z) f / scale^k with probabilists' Hermite polynomials
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        coefficients = [0.0] * k + [1.0]
        return (-1.0) ** k * hermeval(z, coefficients) / self.scale**k * self.pdf(x)

    def ppf(self, q):
        return self.distribution.ppf(q)


def make_density(name, loc=0.0, scale=1.0):
    if name == "uniform":
        return UniformDensity()
    if name == "truncnorm":
        return TruncatedNormalDensity(loc, scale)
    raise InvalidDgpError(f"X_DENSITY must be uniform or truncnorm, got {name!r}.")


@dataclass(frozen=True)
class PiecewisePolynomial:
    """A function equal to ``minus`` left of zero and ``plus`` on [0, inf)."""

    minus: Polynomial
    plus: Polynomial

    @classmethod
    def from_coefficients(cls, minus, plus):
        return cls(Polynomial(list(minus) or [0.0]), Polynomial(list(plus) or [0.0]))

    @classmethod
    def constant(cls, value):
        return cls.from_coefficients([value], [value])

    def side(self, side):
        if side == "plus":
            return self.plus
        if side == "minus":
            return self.minus
        raise RangeError(f"side must be plus or minus, got {side!r}.")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.plus(x), self.minus(x))

    def limit(self, side, derivative=0):
        """One-sided limit at zero of the given derivative."""
        poly = self.side(side)
        if derivative:
            poly = poly.deriv(derivative)
        return float(poly(0.0))


def _side_of(x):
    return "plus" if x >= 0 else "minus"


@dataclass(frozen=True, eq=False)
class DgpSpec:
    density: UniformDensity | TruncatedNormalDensity
    mu_z: tuple[PiecewisePolynomial, ...]
    sigma_z: np.ndarray
    p_poly: Polynomial
    q_poly: Polynomial
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    sigma_eps: float
    confound_shift: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        p = len(self.mu_z)
        sigma = np.array(self.sigma_z, dtype=float).reshape(p, p)
        gamma_plus = np.array(self.gamma_plus, dtype=float).reshape(p)
        gamma_minus = np.array(self.gamma_minus, dtype=float).reshape(p)
        for array in (sigma, gamma_plus, gamma_minus):
            array.setflags(write=False)
        object.__setattr__(self, "sigma_z", sigma)
        object.__setattr__(self, "gamma_plus", gamma_plus)
        object.__setattr__(self, "gamma_minus", gamma_minus)
        object.__setattr__(self, "mu_z", tuple(self.mu_z))
        self.validate()

    def validate(self):
        """Raises InvalidDgpError when the density, covariate mean or covariance is unusable."""
        if not self.density.pdf(0.0) > 0:
            raise InvalidDgpError("The running-variable density must be positive at the cutoff.")
        for k, mu in enumerate(self.mu_z):
            if abs(mu.limit("plus") - mu.limit("minus")) > CONTINUITY_TOL:
                raise InvalidDgpError(f"mu_Z{k + 1} must be continuous at the cutoff.")
        if not np.allclose(self.sigma_z, self.sigma_z.T):
            raise InvalidDgpError("SIGMA_Z must be symmetric.")
        if self.p and np.min(np.linalg.eigvalsh(self.sigma_z)) < -PSD_TOL:
            raise InvalidDgpError("SIGMA_Z must be positive semidefinite.")
        if self.sigma_eps < 0:
            raise InvalidDgpError("SIGMA_EPS must be non-negative.")

    @property
    def p(self):
        return len(self.mu_z)

    def gamma(self, side):
        return self.gamma_plus if side == "plus" else self.gamma_minus

    def structural_mean(self, side):
        return self.p_poly if side == "plus" else self.q_poly

    def outcome_polynomial(self, side, adjust=None):
        """
        mu_Y on one side as a polynomial; with ``adjust`` it is the mean of Y - Z' adjust instead.
        """
        loading = self.gamma(side) if adjust is None else self.gamma(side) - np.asarray(adjust, dtype=float)
        poly = self.structural_mean(side)
        for k, mu in enumerate(self.mu_z):
            poly = poly + float(loading[k]) * mu.side(side)
        if side == "plus":
            poly = poly + float(self.confound_shift)
        return poly

    def mu_z_at(self, x, side=None):
        side = side or _side_of(x)
        return np.array([mu.side(side)(x) for mu in self.mu_z], dtype=float)

    def mu_y_at(self, x, side=None):
        side = side or _side_of(x)
        return float(self.outcome_polynomial(side)(x))

    @property
    def tau_y(self):
        mu_z0 = self.mu_z_at(0.0, "plus")
        return float(
            self.p_poly(0.0) + self.confound_shift - self.q_poly(0.0) + mu_z0 @ (self.gamma_plus - self.gamma_minus)
        )

    def with_confounding(self, shift):
        return DgpSpec(
            density=self.density,
            mu_z=self.mu_z,
            sigma_z=self.sigma_z,
            p_poly=self.p_poly,
            q_poly=self.q_poly,
            gamma_plus=self.gamma_plus,
            gamma_minus=self.gamma_minus,
            sigma_eps=self.sigma_eps,
            confound_shift=shift,
            name=f"{self.name}-confounded",
        )


DGP1_W = np.array([1.0, -0.5])
DGP1_P = Polynomial([1.0, 0.5, 1.0])
DGP1_Q = Polynomial([0.0, 0.3, -1.0])


def dgp1(confound_shift=0.0) -> DgpSpec:
    """Uniform X, two mean-zero covariates independent of X, loadings 2w right and w left."""
    return DgpSpec(
        density=UniformDensity(),
        mu_z=(PiecewisePolynomial.constant(0.0), PiecewisePolynomial.constant(0.0)),
        sigma_z=np.eye(2),
        p_poly=DGP1_P,
        q_poly=DGP1_Q,
        gamma_plus=2.0 * DGP1_W,
        gamma_minus=DGP1_W,
        sigma_eps=0.5,
        confound_shift=confound_shift,
        name="dgp1",
    )


def dgp2(a=2.0, confound_shift=0.0) -> DgpSpec:
    """One covariate whose mean a x^2 1[x >= 0] has a curvature jump; equal loadings on both sides."""
    return DgpSpec(
        density=UniformDensity(),
        mu_z=(PiecewisePolynomial.from_coefficients([0.0], [0.0, 0.0, a]),),
        sigma_z=np.eye(1),
        p_poly=DGP1_P,
        q_poly=DGP1_Q,
        gamma_plus=[1.0],
        gamma_minus=[1.0],
        sigma_eps=0.5,
        confound_shift=confound_shift,
        name="dgp2",
    )


def dgp3(loc=0.5, scale=1.0, confound_shift=0.0) -> DgpSpec:
    """Tilted running-variable density (f'(0) != 0), one mean-zero covariate with loadings 2 and 1."""
    return DgpSpec(
        density=TruncatedNormalDensity(loc, scale),
        mu_z=(PiecewisePolynomial.constant(0.0),),
        sigma_z=np.eye(1),
        p_poly=DGP1_P,
        q_poly=DGP1_Q,
        gamma_plus=[2.0],
        gamma_minus=[1.0],
        sigma_eps=0.5,
        confound_shift=confound_shift,
        name="dgp3",
    )


BUILTIN_DGPS = {"dgp1": dgp1, "dgp2": dgp2, "dgp3": dgp3}


def _file_env(path):
    """An environ.Env whose variables come only from the key-value file at ``path``."""
    env_class = type("DgpFileEnv", (environ.Env,), {"ENVIRON": {}})
    env_class.read_env(str(path), overwrite=True)
    return env_class()


def load_dgp(path) -> DgpSpec:
    """
    Reads a DGP from a key-value file.

    Keys: DGP_NAME, X_DENSITY (uniform | truncnorm), X_LOC, X_SCALE, P_COEFFS, Q_COEFFS
    (ascending powers), N_COVARIATES, MU_Z<k>_MINUS, MU_Z<k>_PLUS, SIGMA_Z (row-major),
    GAMMA_PLUS, GAMMA_MINUS, SIGMA_EPS, CONFOUND_SHIFT.
    """
    path = Path(path)
    if not path.is_file():
        logger.error("DGP file %s does not exist", path)
        raise IngestionError(f"DGP file {path} does not exist.")
    env = _file_env(path)
    try:
        p = env.int("N_COVARIATES", default=0)
        density = make_density(
            env.str("X_DENSITY", default="uniform"), env.float("X_LOC", default=0.0), env.float("X_SCALE", default=1.0)
        )
        mu_z = tuple(
            PiecewisePolynomial.from_coefficients(
                env.list(f"MU_Z{k}_MINUS", cast=float, default=[0.0]),
                env.list(f"MU_Z{k}_PLUS", cast=float, default=[0.0]),
            )
            for k in range(1, p + 1)
        )
        sigma = env.list("SIGMA_Z", cast=float, default=[]) if p else []
        if len(sigma) != p * p:
            raise InvalidDgpError(f"SIGMA_Z must hold {p * p} entries, found {len(sigma)}.")
        gamma_plus = env.list("GAMMA_PLUS", cast=float, default=[]) if p else []
        gamma_minus = env.list("GAMMA_MINUS", cast=float, default=[]) if p else []
        if len(gamma_plus) != p or len(gamma_minus) != p:
            raise InvalidDgpError(f"GAMMA_PLUS and GAMMA_MINUS must each hold {p} entries.")
        spec = DgpSpec(
            density=density,
            mu_z=mu_z,
            sigma_z=np.array(sigma).reshape(p, p),
            p_poly=Polynomial(env.list("P_COEFFS", cast=float)),
            q_poly=Polynomial(env.list("Q_COEFFS", cast=float)),
            gamma_plus=gamma_plus,
            gamma_minus=gamma_minus,
            sigma_eps=env.float("SIGMA_EPS"),
            confound_shift=env.float("CONFOUND_SHIFT", default=0.0),
            name=env.str("DGP_NAME", default=path.stem),
        )
    except (ImproperlyConfigured, ValueError) as e:
        if isinstance(e, InvalidDgpError):
            raise
        logger.error("Failed to read DGP file %s: %s", path, e)
        raise IngestionError(f"DGP file {path}: {e}") from e
    logger.info("Loaded DGP %s from %s", spec.name, path)
    return spec


def _join(values):
    return ",".join(repr(float(v)) for v in np.ravel(values))


def dump_dgp(spec: DgpSpec) -> str:
    """Serializes a DGP in the key-value format read by ``load_dgp``."""
    lines = [
        f"DGP_NAME={spec.name}",
        f"X_DENSITY={spec.density.name}",
    ]
    lines.extend(f"{key}={value!r}" for key, value in spec.density.params.items())
    lines.extend(
        [
            f"P_COEFFS={_join(spec.p_poly.coef)}",
            f"Q_COEFFS={_join(spec.q_poly.coef)}",
            f"N_COVARIATES={spec.p}",
        ]
    )
    for k, mu in enumerate(spec.mu_z, start=1):
        lines.append(f"MU_Z{k}_MINUS={_join(mu.minus.coef)}")
        lines.append(f"MU_Z{k}_PLUS={_join(mu.plus.coef)}")
    if spec.p:
        lines.extend(
            [
                f"SIGMA_Z={_join(spec.sigma_z)}",
                f"GAMMA_PLUS={_join(spec.gamma_plus)}",
                f"GAMMA_MINUS={_join(spec.gamma_minus)}",
            ]
        )
    lines.append(f"SIGMA_EPS={spec.sigma_eps!r}")
    lines.append(f"CONFOUND_SHIFT={spec.confound_shift!r}")
    return "\n".join(lines) + "\n"


def resolve_dgp(name_or_path) -> DgpSpec:
    """A built-in DGP by name, or one loaded from a key-value file."""
    if name_or_path in BUILTIN_DGPS:
        return BUILTIN_DGPS[name_or_path]()
    return load_dgp(name_or_path)
