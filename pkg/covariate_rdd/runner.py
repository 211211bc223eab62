"""
The ``run`` operation behind every command: resolve inputs, compute, and build a report mapping.

Library errors are mapped to exit codes here and nowhere else: 2 usage, 3 ingestion,
4 numerical, 5 insufficient support.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from covariate_rdd import settings
from covariate_rdd.dgp import resolve_dgp
from covariate_rdd.errors import RangeError, RddError
from covariate_rdd.inference import UNDERSMOOTHING_NOTE, VARIANCE_METHODS, check_alpha, summarize
from covariate_rdd.ingest import ingest_csv
from covariate_rdd.kernels import constants, kappa, kappa_inverse_closed_form, variance_constant
from covariate_rdd.local_fit import check_bandwidth, estimate
from covariate_rdd.monte_carlo import MIN_NORMALITY_REPS, normality_report, replicate
from covariate_rdd.oracle import (
    assumption_checklist,
    leading_bias,
    leading_variance,
    one_sided_variances,
    tilde_gamma,
    variance_comparison,
)
from covariate_rdd.reports import write_per_rep_csv
from covariate_rdd.sensitivity import analyze, sensitivity_curve
from covariate_rdd.utils import resolve_kernel

logger = logging.getLogger(__name__)

COMMANDS = ("estimate", "sensitivity", "simulate", "kernel-info", "validate")
AUTO_BANDWIDTH_LABEL = "rule-of-thumb (1.06*sd(x)*n^-1/5), not part of the estimator's theory"
H_RULES = {"n^-1/3": -1.0 / 3.0, "n^-1/4": -1.0 / 4.0, "n^-1/5": -1.0 / 5.0}
EXIT_OK = 0


@dataclass
class RunConfig:
    command: str
    input_path: str | None = None
    kernel: str = field(default_factory=lambda: settings.RDD_DEFAULT_KERNEL)
    kernel_path: str | None = None
    bandwidth: float | str | None = None
    order: int = field(default_factory=lambda: settings.RDD_DEFAULT_ORDER)
    cutoff: float = 0.0
    alpha: float = field(default_factory=lambda: settings.RDD_DEFAULT_ALPHA)
    y_col: str = "y"
    x_col: str = "x"
    z_cols: list[str] | None = None
    density_bandwidth: float | None = None
    variance_method: str = "sample"
    tau_bar: float | None = None
    tau_bar_grid: list[float] | None = None
    dgp: str | None = None
    n: int | None = None
    reps: int | None = None
    seed: int | None = None
    h_rule: str = "n^-1/3"
    h_scale: float = 1.0
    covariates: bool = True
    workers: int = field(default_factory=lambda: settings.RDD_SIMULATION_WORKERS)
    per_rep_csv: str | None = None
    output: str = "text"
    out_path: str | None = None

    def validate(self):
        """Raises RangeError when a field required by the command is missing or out of range."""
        if self.command not in COMMANDS:
            raise RangeError(f"Unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}.")
        if self.output not in ("text", "json"):
            raise RangeError(f"output must be text or json, got {self.output!r}.")
        if self.order not in (1, 2):
            raise RangeError(f"order must be 1 or 2, got {self.order!r}.")
        check_alpha(self.alpha)
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "auto":
                raise RangeError(f"bandwidth must be a positive number or 'auto', got {self.bandwidth!r}.")
        elif self.bandwidth is not None:
            check_bandwidth(self.bandwidth)
        if self.density_bandwidth is not None:
            check_bandwidth(self.density_bandwidth)
        if self.variance_method not in VARIANCE_METHODS:
            raise RangeError(
                f"variance method must be one of {', '.join(VARIANCE_METHODS)}, got {self.variance_method!r}."
            )
        if self.command in ("estimate", "sensitivity"):
            if not self.input_path:
                raise RangeError(f"{self.command} needs an input CSV file.")
            if self.bandwidth is None:
                raise RangeError(f"{self.command} needs a bandwidth (a number or 'auto').")
        if self.command == "sensitivity" and self.tau_bar is None and not self.tau_bar_grid:
            raise RangeError("sensitivity needs tau_bar or a tau_bar grid.")
        if self.command in ("simulate", "validate") and not self.dgp:
            raise RangeError(f"{self.command} needs a DGP name or file.")
        if self.command == "simulate":
            if not self.n or self.n < 1:
                raise RangeError("simulate needs a positive sample size n.")
            if not self.reps or self.reps < 1:
                raise RangeError("simulate needs a positive number of replications.")
            if self.bandwidth == "auto":
                raise RangeError("simulate takes a numeric bandwidth or an h rule, not 'auto'.")
            if self.bandwidth is None and self.h_rule not in H_RULES:
                raise RangeError(f"h_rule must be one of {', '.join(H_RULES)}, got {self.h_rule!r}.")
            if self.workers < 1:
                raise RangeError(f"workers must be at least 1, got {self.workers!r}.")


@dataclass(frozen=True)
class RunOutcome:
    exit_code: int
    report: dict


def auto_bandwidth(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(1.06 * np.std(x, ddof=1) * len(x) ** (-1.0 / 5.0))


def _fit_and_summarize(config, kernel):
    data = ingest_csv(config.input_path, config.y_col, config.x_col, config.z_cols, config.cutoff)
    if config.bandwidth == "auto":
        h = auto_bandwidth(data.x)
        rule = AUTO_BANDWIDTH_LABEL
        logger.warning("Using the rule-of-thumb bandwidth h=%.6g", h)
    else:
        h = float(config.bandwidth)
        rule = "user"
    fit = estimate(data, kernel, h, config.order)
    summary = summarize(data, fit, kernel, config.alpha, config.density_bandwidth, config.variance_method)
    report = {
        "command": config.command,
        "kernel": kernel.name,
        "order": config.order,
        "h": h,
        "bandwidth_rule": rule,
        "cutoff": data.cutoff,
        "alpha": config.alpha,
        "n": data.n,
        "n_left": fit.effective_n_left,
        "n_right": fit.effective_n_right,
        "p": data.p,
        "tau_hat": fit.tau_hat,
        "theta": fit.theta,
        "gamma": fit.gamma,
        "f_hat": summary.f_hat,
        "s2_hat": summary.s2_hat,
        "variance_method": summary.variance_method,
        "se_tau": summary.se_tau,
        "ci_low": summary.ci_low,
        "ci_high": summary.ci_high,
        "condition_estimate": fit.condition_estimate,
        "note": UNDERSMOOTHING_NOTE,
    }
    return fit, summary, report


def _run_estimate(config, kernel):
    _, _, report = _fit_and_summarize(config, kernel)
    return report


def _run_sensitivity(config, kernel):
    fit, summary, report = _fit_and_summarize(config, kernel)
    if config.tau_bar is not None:
        result = analyze(fit.tau_hat, config.tau_bar, summary.se_tau, config.alpha)
        report["tau_bar"] = result.tau_bar
        report["delta_hat"] = result.delta_hat
        report["rejection_region"] = result.rejection_region
    if config.tau_bar_grid:
        report["curve"] = sensitivity_curve(fit, summary, config.tau_bar_grid, config.alpha)
    return report


def _simulation_bandwidth(config):
    if config.bandwidth is not None:
        return float(config.bandwidth)
    return float(config.h_scale * config.n ** H_RULES[config.h_rule])


def _run_simulate(config, kernel):
    dgp = resolve_dgp(config.dgp)
    seed_generated = config.seed is None
    seed = int(np.random.SeedSequence().entropy) if seed_generated else int(config.seed)
    if seed_generated:
        logger.warning("No seed given; using generated seed %d", seed)
    h = _simulation_bandwidth(config)
    result = replicate(
        dgp,
        config.n,
        h,
        kernel,
        config.order,
        config.reps,
        seed,
        alpha=config.alpha,
        covariates=config.covariates,
        workers=config.workers,
    )
    if config.per_rep_csv:
        write_per_rep_csv(result, config.per_rep_csv)
    report = {"command": "simulate", "seed": seed, "seed_generated": seed_generated, "h_rule": config.h_rule}
    report.update(result.to_dict(per_rep=False))
    if len(result.per_rep) >= MIN_NORMALITY_REPS:
        report["normality"] = normality_report(result)
    return report


def _run_kernel_info(config, kernel):
    m = kernel.moments
    report = {
        "command": "kernel-info",
        "kernel": kernel.name,
        "k_plus": m.k_plus,
        "k_minus": m.k_minus,
        "k_full": m.k_full,
        "ksq_plus": m.ksq_plus,
        "ksq_minus": m.ksq_minus,
        "constants": constants(kernel),
        "kappa_order1": kappa(kernel, 1).entries,
        "kappa_order1_inverse": kappa_inverse_closed_form(kernel),
        "kappa_order1_det": kappa(kernel, 1).det,
        "kappa_order2": kappa(kernel, 2).entries,
        "kappa_order2_det": kappa(kernel, 2).det,
        "variance_constant_order2": {
            "minus": variance_constant(kernel, 2, "minus"),
            "plus": variance_constant(kernel, 2, "plus"),
        },
    }
    return report


def _run_validate(config, kernel):
    dgp = resolve_dgp(config.dgp)
    checks = assumption_checklist(dgp, kernel)
    sigma_l2, sigma_r2 = one_sided_variances(dgp)
    return {
        "command": "validate",
        "dgp": dgp.name,
        "kernel": kernel.name,
        "passed": all(c.passed for c in checks),
        "checks": checks,
        "tau_y": dgp.tau_y,
        "tilde_gamma": tilde_gamma(dgp),
        "sigma_l2": sigma_l2,
        "sigma_r2": sigma_r2,
        "bias_leading": leading_bias(dgp, kernel, config.order),
        "variance_leading": leading_variance(dgp, kernel, config.order),
        "variance_comparison": variance_comparison(dgp),
    }


HANDLERS = {
    "estimate": _run_estimate,
    "sensitivity": _run_sensitivity,
    "simulate": _run_simulate,
    "kernel-info": _run_kernel_info,
    "validate": _run_validate,
}


def run(config: RunConfig) -> RunOutcome:
    """Executes one command; failures come back as a nonzero exit code with an error category."""
    try:
        config.validate()
        kernel = resolve_kernel(config.kernel, config.kernel_path or settings.RDD_CUSTOM_KERNEL_PATH)
        report = HANDLERS[config.command](config, kernel)
    except RddError as e:
        logger.error("%s failed (%s): %s", config.command, e.category, e)
        return RunOutcome(
            exit_code=e.exit_code,
            report={"command": config.command, "error": {"category": e.category, "message": str(e)}},
        )
    logger.info("Finished %s", config.command)
    return RunOutcome(exit_code=EXIT_OK, report=report)
