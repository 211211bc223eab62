"""
Seeded sampling from DGPs and replication experiments.

Random streams come from numpy's counter-based Philox bit generator. Replication ``i`` of
an experiment with master seed ``s`` is seeded with ``SeedSequence(s, spawn_key=(i,))``, so
every replication owns an independent stream that does not depend on execution order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import stats

from covariate_rdd.dgp import DgpSpec
from covariate_rdd.errors import RangeError, RddError
from covariate_rdd.inference import normal_quantile, summarize
from covariate_rdd.kernels import KernelSpec
from covariate_rdd.local_fit import Dataset, check_bandwidth, estimate
from covariate_rdd.oracle import leading_bias, leading_variance, population_coefficients

logger = logging.getLogger(__name__)

MAX_FAILURE_SHARE = 0.01
MIN_NORMALITY_REPS = 100


def replication_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


def _generator(seed):
    return np.random.Generator(np.random.Philox(seed))


def _covariance_root(sigma):
    eigenvalues, eigenvectors = np.linalg.eigh(sigma)
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


def sample(dgp: DgpSpec, n: int, seed) -> Dataset:
    """
    Draws n independent observations from ``dgp``.

    X comes from the inverse cdf of uniforms, then the covariate noise, then the outcome
    noise, always in that order, so the sample is a pure function of (dgp, n, seed).
    """
    if n < 1:
        raise RangeError(f"n must be at least 1, got {n!r}.")
    rng = _generator(seed)
    x = dgp.density.ppf(rng.random(n))
    treated = x >= 0
    if dgp.p:
        mu_z = np.column_stack([mu(x) for mu in dgp.mu_z])
    else:
        mu_z = np.empty((n, 0))
    z = mu_z + rng.standard_normal((n, dgp.p)) @ _covariance_root(dgp.sigma_z).T
    loadings = np.where(treated[:, None], dgp.gamma_plus, dgp.gamma_minus)
    y = (
        np.where(treated, dgp.p_poly(x), dgp.q_poly(x))
        + np.sum(z * loadings, axis=1)
        + dgp.sigma_eps * rng.standard_normal(n)
        + dgp.confound_shift * treated
    )
    return Dataset(y=y, x=x, z=z, cutoff=0.0)


@dataclass(frozen=True)
class RepStat:
    index: int
    tau_hat: float
    s2_hat: float
    se_tau: float
    standardized: float
    covered_oracle: bool
    covered_plugin: bool


@dataclass(frozen=True)
class RepFailure:
    index: int
    category: str
    message: str
    error: Exception = field(repr=False, compare=False)


@dataclass(frozen=True)
class MonteCarloReport:
    dgp_name: str
    n: int
    h: float
    kernel: str
    order: int
    reps: int
    master_seed: int
    alpha: float
    covariates: bool
    tau_y: float
    bias_leading: float
    variance_leading: float
    per_rep: tuple[RepStat, ...]
    failures: tuple[RepFailure, ...]
    ks_distance: float
    coverage_oracle: float
    coverage_plugin: float
    mean_std: float
    var_std: float
    mean_tau: float
    var_tau: float

    @property
    def failing(self):
        return len(self.failures) > MAX_FAILURE_SHARE * self.reps

    @property
    def standardized(self):
        return np.array([r.standardized for r in self.per_rep])

    def to_dict(self, per_rep=True):
        data = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("per_rep", "failures")}
        if per_rep:
            data["per_rep"] = [asdict(r) for r in self.per_rep]
        data["failures"] = [{"index": f.index, "category": f.category, "message": f.message} for f in self.failures]
        data["failure_count"] = len(self.failures)
        data["failing"] = self.failing
        return data


@dataclass(frozen=True)
class NormalityReport:
    ks_distance: float
    coverage_95: float
    coverage_plugin: float
    mean_std: float
    var_std: float
    passes: dict

    @property
    def passed(self):
        return all(self.passes.values())


@dataclass(frozen=True)
class RateRow:
    h: float
    ratio: float
    leading_bias: float


def ks_distance(values) -> float:
    """Exact sup-distance between the empirical cdf of ``values`` and the standard normal cdf."""
    return float(stats.kstest(np.asarray(values, dtype=float), "norm").statistic)


def _variance(values):
    return float(np.var(values, ddof=1)) if len(values) > 1 else 0.0


def replicate(
    dgp: DgpSpec,
    n: int,
    h: float,
    kernel: KernelSpec,
    order: int = 1,
    reps: int = 100,
    master_seed: int = 0,
    *,
    alpha: float = 0.05,
    covariates: bool = True,
    workers: int = 1,
) -> MonteCarloReport:
    """
    Runs ``reps`` seeded replications of sample, fit and plug-in inference.

    Each replication is standardized with the oracle bias and variance; ``covariates=False``
    fits without Z on the same samples. A failing replication is logged, recorded and left out
    of the aggregates.
    """
    if reps < 1:
        raise RangeError(f"reps must be at least 1, got {reps!r}.")
    if workers < 1:
        raise RangeError(f"workers must be at least 1, got {workers!r}.")
    check_bandwidth(h)
    tau_y = dgp.tau_y
    bias = leading_bias(dgp, kernel, order, covariates)
    variance = leading_variance(dgp, kernel, order, covariates)
    scale = np.sqrt(n * h)
    q = normal_quantile(1.0 - alpha / 2.0)

    def run_one(index):
        try:
            data = sample(dgp, n, replication_seed(master_seed, index))
            if not covariates:
                data = Dataset(y=data.y, x=data.x, cutoff=data.cutoff)
            fit = estimate(data, kernel, h, order)
            summary = summarize(data, fit, kernel, alpha)
        except RddError as e:
            logger.warning("Replication %d failed: %s", index, e)
            return RepFailure(index=index, category=e.category, message=str(e), error=e)
        standardized = float(scale * (fit.tau_hat - tau_y - h**2 * bias) / np.sqrt(variance))
        return RepStat(
            index=index,
            tau_hat=fit.tau_hat,
            s2_hat=summary.s2_hat,
            se_tau=summary.se_tau,
            standardized=standardized,
            covered_oracle=abs(standardized) <= q,
            covered_plugin=summary.ci_low <= tau_y <= summary.ci_high,
        )

    if workers == 1:
        outcomes = [run_one(i) for i in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_one, range(reps)))

    outcomes.sort(key=lambda o: o.index)
    per_rep = tuple(o for o in outcomes if isinstance(o, RepStat))
    failures = tuple(o for o in outcomes if isinstance(o, RepFailure))
    if not per_rep:
        raise failures[0].error
    if len(failures) > MAX_FAILURE_SHARE * reps:
        logger.warning("%d of %d replications failed; the report is flagged as failing", len(failures), reps)

    std = np.array([r.standardized for r in per_rep])
    taus = np.array([r.tau_hat for r in per_rep])
    report = MonteCarloReport(
        dgp_name=dgp.name,
        n=n,
        h=float(h),
        kernel=kernel.name,
        order=order,
        reps=reps,
        master_seed=master_seed,
        alpha=alpha,
        covariates=covariates,
        tau_y=tau_y,
        bias_leading=bias,
        variance_leading=variance,
        per_rep=per_rep,
        failures=failures,
        ks_distance=ks_distance(std),
        coverage_oracle=float(np.mean([r.covered_oracle for r in per_rep])),
        coverage_plugin=float(np.mean([r.covered_plugin for r in per_rep])),
        mean_std=float(np.mean(std)),
        var_std=_variance(std),
        mean_tau=float(np.mean(taus)),
        var_tau=_variance(taus),
    )
    logger.info("Finished %d replications of %s (n=%d, h=%g)", reps, dgp.name, n, h)
    return report


def normality_report(
    report: MonteCarloReport,
    *,
    ks_threshold=0.04,
    coverage_band=(0.93, 0.97),
    mean_band=(-0.1, 0.1),
    var_band=(0.85, 1.15),
) -> NormalityReport:
    """Pass/fail summary of the standardized statistics; the default thresholds are engineering choices."""
    if len(report.per_rep) < MIN_NORMALITY_REPS:
        raise RangeError(f"A normality report needs at least {MIN_NORMALITY_REPS} replications.")
    passes = {
        "ks_distance": report.ks_distance <= ks_threshold,
        "coverage": coverage_band[0] <= report.coverage_oracle <= coverage_band[1],
        "mean": mean_band[0] <= report.mean_std <= mean_band[1],
        "variance": var_band[0] <= report.var_std <= var_band[1],
        "failures": not report.failing,
    }
    return NormalityReport(
        ks_distance=report.ks_distance,
        coverage_95=report.coverage_oracle,
        coverage_plugin=report.coverage_plugin,
        mean_std=report.mean_std,
        var_std=report.var_std,
        passes=passes,
    )


def rate_check(dgp: DgpSpec, kernel: KernelSpec, order: int, h_grid, *, tol=None) -> list[RateRow]:
    """(theta0_jump(h) - tau_Y) / h^2 along a decreasing bandwidth grid, next to the leading bias."""
    grid = [float(h) for h in h_grid]
    if not grid:
        raise RangeError("h grid must not be empty.")
    if any(not 0 < h <= 1 for h in grid):
        raise RangeError("h grid values must lie in (0, 1].")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise RangeError("h grid must be strictly decreasing.")
    bias = leading_bias(dgp, kernel, order)
    rows = []
    for h in grid:
        theta0, _ = population_coefficients(dgp, kernel, h, order, tol=tol)
        rows.append(RateRow(h=h, ratio=float((theta0[1] - dgp.tau_y) / h**2), leading_bias=bias))
    return rows
