"""Runtime settings, read once from the environment."""

import environ

ENV = environ.Env()

RDD_DEFAULT_KERNEL = ENV.str("RDD_DEFAULT_KERNEL", default="triangular")
RDD_DEFAULT_ORDER = ENV.int("RDD_DEFAULT_ORDER", default=1)
RDD_DEFAULT_ALPHA = ENV.float("RDD_DEFAULT_ALPHA", default=0.05)
RDD_CUSTOM_KERNEL_PATH = ENV.str("RDD_CUSTOM_KERNEL_PATH", default="")
RDD_QUADRATURE_TOL = ENV.float("RDD_QUADRATURE_TOL", default=1e-10)
RDD_SIMULATION_WORKERS = ENV.int("RDD_SIMULATION_WORKERS", default=1)
RDD_LOG_LEVEL = ENV.str("RDD_LOG_LEVEL", default="WARNING")
RDD_STRICT_CHECKS = ENV.bool("RDD_STRICT_CHECKS", default=True)
