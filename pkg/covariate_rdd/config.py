# SPDX-FileCopyrightText: (C) covariate-rdd authors
#
# SPDX-License-Identifier: MIT
import logging

from django.core.exceptions import ImproperlyConfigured

from covariate_rdd import settings

logger = logging.getLogger(__name__)

BUILTIN_KERNELS = ("triangular", "epanechnikov", "uniform")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}


def configure_logging(verbosity=None):
    """Sets the root log level from RDD_LOG_LEVEL, or from a command verbosity when given."""
    if verbosity is None:
        level = getattr(logging, settings.RDD_LOG_LEVEL.upper())
    else:
        level = VERBOSITY_LEVELS.get(int(verbosity), logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)


class RddConfig:
    """
    Start-up configuration for the command line.
    Validates settings, configures logging and tests a plug-in kernel when one is configured."""

    def ready(self, verbosity=None):
        if settings.RDD_STRICT_CHECKS:
            RddConfig.validate_settings()
        configure_logging(verbosity)

        if settings.RDD_CUSTOM_KERNEL_PATH:
            # tests whether the plug-in module loads and its kernel passes its own checks
            logger.debug("Testing plug-in kernel at %s...", settings.RDD_CUSTOM_KERNEL_PATH)
            # pylint: disable=import-outside-toplevel
            from covariate_rdd.utils import get_kernel_class

            get_kernel_class(settings.RDD_CUSTOM_KERNEL_PATH).test_config()
        else:
            logger.debug("No plug-in kernel configured; using built-in kernels only.")

    @staticmethod
    def validate_settings():
        """
        Validates the estimation settings.
        Raises ImproperlyConfigured if any setting is missing or invalid.
        """
        string_settings = ["RDD_DEFAULT_KERNEL", "RDD_CUSTOM_KERNEL_PATH", "RDD_LOG_LEVEL"]
        int_settings = ["RDD_DEFAULT_ORDER", "RDD_SIMULATION_WORKERS"]
        float_settings = ["RDD_DEFAULT_ALPHA", "RDD_QUADRATURE_TOL"]
        for s in string_settings + int_settings + float_settings + ["RDD_STRICT_CHECKS"]:
            if not hasattr(settings, s):
                raise ImproperlyConfigured(f"{s} must be defined.")

        for st in string_settings:
            if not isinstance(getattr(settings, st), str):
                raise ImproperlyConfigured(f"{st} must be a string.")
        for i in int_settings:
            if isinstance(getattr(settings, i), bool) or not isinstance(getattr(settings, i), int):
                raise ImproperlyConfigured(f"{i} must be an integer.")
        for f in float_settings:
            if not isinstance(getattr(settings, f), (int, float)):
                raise ImproperlyConfigured(f"{f} must be a number.")

        if settings.RDD_DEFAULT_KERNEL not in BUILTIN_KERNELS + ("custom",):
            raise ImproperlyConfigured(f"RDD_DEFAULT_KERNEL must be one of {', '.join(BUILTIN_KERNELS)} or custom.")
        if settings.RDD_DEFAULT_KERNEL == "custom" and not settings.RDD_CUSTOM_KERNEL_PATH:
            raise ImproperlyConfigured("RDD_CUSTOM_KERNEL_PATH must be set when RDD_DEFAULT_KERNEL is custom.")
        if settings.RDD_DEFAULT_ORDER not in (1, 2):
            raise ImproperlyConfigured("RDD_DEFAULT_ORDER must be 1 or 2.")
        if not 0 < settings.RDD_DEFAULT_ALPHA < 1:
            raise ImproperlyConfigured("RDD_DEFAULT_ALPHA must lie strictly between 0 and 1.")
        if settings.RDD_QUADRATURE_TOL <= 0:
            raise ImproperlyConfigured("RDD_QUADRATURE_TOL must be positive.")
        if settings.RDD_SIMULATION_WORKERS < 1:
            raise ImproperlyConfigured("RDD_SIMULATION_WORKERS must be at least 1.")
        if settings.RDD_LOG_LEVEL.upper() not in LOG_LEVELS:
            raise ImproperlyConfigured(f"RDD_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}.")
