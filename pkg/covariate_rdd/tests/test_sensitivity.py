from unittest import TestCase
from unittest.mock import patch

import numpy as np
import pytest

from covariate_rdd.dgp import dgp1
from covariate_rdd.errors import RangeError
from covariate_rdd.inference import normal_quantile, standard_error, summarize
from covariate_rdd.kernels import TRIANGULAR
from covariate_rdd.local_fit import estimate
from covariate_rdd.monte_carlo import replication_seed, sample
from covariate_rdd.sensitivity import (
    analyze,
    delta_hat,
    reject,
    reject_by_interval,
    sensitivity_curve,
)


def dgp1_fit(seed=7, n=4000, h=0.12):
    data = sample(dgp1(), n, seed)
    fit = estimate(data, TRIANGULAR, h)
    return fit, summarize(data, fit, TRIANGULAR)


class TestDeltaHat(TestCase):
    def test_formula(self):
        value = delta_hat(1.2, 0.5, 0.1, 0.05)
        assert value == pytest.approx(1.2 - 0.5 - normal_quantile(0.95) * 0.1, abs=1e-15)

    def test_recomputation_from_estimate(self):
        fit, summary = dgp1_fit()
        result = analyze(fit.tau_hat, 0.5, summary.se_tau)
        recomputed = fit.tau_hat - 0.5 - normal_quantile(0.95) * np.sqrt(summary.s2_hat / (fit.n * fit.h))
        assert abs(result.delta_hat - recomputed) <= 1e-12

    def test_no_rejection_region(self):
        result = analyze(0.3, 0.5, 0.1)
        assert not result.rejects_any
        assert result.rejection_region is None

    def test_rejection_region(self):
        result = analyze(2.0, 0.5, 0.1)
        assert result.rejection_region == (0.0, result.delta_hat)

    def test_invalid_inputs(self):
        with pytest.raises(RangeError):
            delta_hat(1.0, 0.0, 0.1)
        with pytest.raises(RangeError):
            delta_hat(1.0, 0.5, -0.1)
        with pytest.raises(RangeError):
            delta_hat(1.0, 0.5, 0.1, alpha=1.0)

    @patch("covariate_rdd.sensitivity.logger")
    def test_logs_when_nothing_is_rejected(self, mock_logger):
        analyze(0.3, 0.5, 0.1)
        mock_logger.info.assert_called_once()


class TestRejection(TestCase):
    def test_boundary_is_rejected(self):
        result = analyze(2.0, 0.5, 0.1)
        assert reject(result.delta_hat, result)
        assert not reject(result.delta_hat + 1e-9, result)

    def test_delta_must_be_positive(self):
        result = analyze(2.0, 0.5, 0.1)
        with pytest.raises(RangeError):
            reject(0.0, result)
        with pytest.raises(RangeError):
            reject_by_interval(0.0, 0.5, 2.0, 1.0, 100, 0.5)

    def test_interval_cross_check(self):
        fit, summary = dgp1_fit()
        tau_bar = 0.4
        result = analyze(fit.tau_hat, tau_bar, summary.se_tau)
        for delta in np.linspace(0.003, 1.5, 100):
            expected = reject(delta, result)
            by_interval = reject_by_interval(delta, tau_bar, fit.tau_hat, summary.s2_hat, fit.n, fit.h)
            assert expected == by_interval

    def test_false_rejection_rate_under_confounding(self):
        # the null holds at its boundary: tau_bar is the unconfounded effect and delta the true shift
        shift = 0.3
        dgp = dgp1(confound_shift=shift)
        n = 2000
        h = n ** (-1.0 / 3.0)
        alpha = 0.05
        reps = 500
        rejections = 0
        for index in range(reps):
            data = sample(dgp, n, replication_seed(99, index))
            fit = estimate(data, TRIANGULAR, h)
            se = standard_error(summarize(data, fit, TRIANGULAR).s2_hat, n, h)
            rejections += reject(shift, analyze(fit.tau_hat, 1.0, se, alpha))
        assert rejections / reps <= alpha + 0.03


class TestSensitivityCurve(TestCase):
    def test_decreasing_in_tau_bar(self):
        fit, summary = dgp1_fit()
        rows = sensitivity_curve(fit, summary, [0.1, 0.5, 1.0, 3.0])
        values = [row.delta_hat for row in rows]
        assert values == sorted(values, reverse=True)
        assert rows[-1].no_rejection

    def test_grid_validation(self):
        fit, summary = dgp1_fit()
        for grid in ([], [0.5, 0.2], [-1.0, 1.0]):
            with pytest.raises(RangeError):
                sensitivity_curve(fit, summary, grid)


class TestDeltaHatProperties(TestCase):
    def test_supremum_of_rejection_set(self):
        fit, summary = dgp1_fit()
        result = analyze(fit.tau_hat, 0.4, summary.se_tau)
        step = 1e-4
        grid = np.arange(step, 2.0, step)
        rejected = [delta for delta in grid if reject(delta, result)]
        assert rejected
        assert max(rejected) <= result.delta_hat < max(rejected) + step

    def test_curve_has_slope_minus_one(self):
        fit, summary = dgp1_fit()
        grid = [0.1, 0.35, 0.8, 1.7]
        values = [row.delta_hat for row in sensitivity_curve(fit, summary, grid)]
        np.testing.assert_allclose(np.diff(values), -np.diff(grid), atol=1e-12)

    def test_increasing_in_alpha(self):
        values = [delta_hat(1.5, 0.5, 0.2, alpha) for alpha in (0.01, 0.05, 0.1, 0.2, 0.4)]
        assert all(after > before for before, after in zip(values, values[1:]))
