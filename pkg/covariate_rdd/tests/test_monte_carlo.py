from unittest import TestCase
from unittest.mock import patch

import numpy as np
import pytest

from covariate_rdd.dgp import dgp1, dgp2
from covariate_rdd.errors import InsufficientSupportError, RangeError
from covariate_rdd.kernels import TRIANGULAR
from covariate_rdd.monte_carlo import (
    ks_distance,
    normality_report,
    replicate,
    replication_seed,
    sample,
)


class TestSampling(TestCase):
    def test_same_seed_same_sample(self):
        first = sample(dgp1(), 100, replication_seed(5, 3))
        second = sample(dgp1(), 100, replication_seed(5, 3))
        np.testing.assert_array_equal(first.x, second.x)
        np.testing.assert_array_equal(first.y, second.y)
        np.testing.assert_array_equal(first.z, second.z)

    def test_replication_streams_differ(self):
        first = sample(dgp1(), 100, replication_seed(5, 0))
        second = sample(dgp1(), 100, replication_seed(5, 1))
        assert not np.array_equal(first.x, second.x)

    def test_moments(self):
        data = sample(dgp1(), 50_000, 1)
        assert data.x.min() >= -1.0 and data.x.max() <= 1.0
        assert np.mean(data.x) == pytest.approx(0.0, abs=0.02)
        np.testing.assert_allclose(np.cov(data.z.T), np.eye(2), atol=0.03)

    def test_covariate_mean_follows_dgp(self):
        data = sample(dgp2(), 50_000, 2)
        right = data.x > 0.5
        expected = np.mean(2.0 * data.x[right] ** 2)
        assert np.mean(data.z[right, 0]) == pytest.approx(expected, abs=0.03)

    def test_rejects_empty_sample(self):
        with pytest.raises(RangeError):
            sample(dgp1(), 0, 1)


class TestKsDistance(TestCase):
    def test_hand_computed(self):
        # a single point at zero: the empirical cdf jumps from 0 to 1 where Phi = 0.5
        assert ks_distance([0.0]) == pytest.approx(0.5)

    def test_normal_draws(self):
        draws = np.random.Generator(np.random.Philox(4)).standard_normal(5000)
        assert ks_distance(draws) < 0.03


class TestReplicate(TestCase):
    def test_deterministic_and_order_independent(self):
        serial = replicate(dgp1(), 500, 0.3, TRIANGULAR, reps=20, master_seed=11)
        threaded = replicate(dgp1(), 500, 0.3, TRIANGULAR, reps=20, master_seed=11, workers=4)
        assert serial.to_dict() == threaded.to_dict()
        assert [r.index for r in serial.per_rep] == list(range(20))

    def test_oracle_constants_recorded(self):
        report = replicate(dgp1(), 500, 0.3, TRIANGULAR, reps=5, master_seed=1)
        assert report.bias_leading == pytest.approx(-0.2)
        assert report.variance_leading == pytest.approx(10.8)
        assert report.tau_y == 1.0
        assert not report.failing

    def test_without_covariates_is_noisier(self):
        adjusted = replicate(dgp1(), 1000, 0.3, TRIANGULAR, reps=200, master_seed=3)
        plain = replicate(dgp1(), 1000, 0.3, TRIANGULAR, reps=200, master_seed=3, covariates=False)
        assert plain.var_tau > 2.0 * adjusted.var_tau
        assert plain.variance_leading == pytest.approx(10.8 * 6.75 / 1.125)

    @patch("covariate_rdd.monte_carlo.logger")
    def test_failures_are_recorded(self, mock_logger):
        # with n = 8 some windows hold fewer than three points per side
        report = replicate(dgp1(), 8, 1.0, TRIANGULAR, reps=50, master_seed=0)
        assert report.failures
        assert report.failing
        assert "insufficient-support" in {f.category for f in report.failures}
        assert len(report.per_rep) + len(report.failures) == 50
        mock_logger.warning.assert_called()

    def test_every_replication_failing_raises(self):
        with pytest.raises(InsufficientSupportError):
            replicate(dgp1(), 3, 1.0, TRIANGULAR, reps=3, master_seed=0)

    def test_argument_checks(self):
        with pytest.raises(RangeError):
            replicate(dgp1(), 100, 0.3, TRIANGULAR, reps=0)
        with pytest.raises(RangeError):
            replicate(dgp1(), 100, 0.3, TRIANGULAR, reps=5, workers=0)


class TestAsymptoticNormality(TestCase):
    def test_standardized_statistics(self):
        n = 2000
        report = replicate(dgp1(), n, n ** (-1.0 / 3.0), TRIANGULAR, reps=2000, master_seed=20240)
        summary = normality_report(report)
        assert summary.ks_distance <= 0.04
        assert -0.1 <= summary.mean_std <= 0.1
        assert 0.85 <= summary.var_std <= 1.15
        assert 0.93 <= summary.coverage_95 <= 0.97
        assert summary.passed

    def test_normality_report_needs_enough_replications(self):
        report = replicate(dgp1(), 500, 0.3, TRIANGULAR, reps=10, master_seed=1)
        with pytest.raises(RangeError):
            normality_report(report)
