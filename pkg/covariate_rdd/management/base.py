import logging

from django.core.management.base import BaseCommand, CommandError

from covariate_rdd import settings
from covariate_rdd.config import configure_logging
from covariate_rdd.reports import emit_report, write_report
from covariate_rdd.runner import RunConfig, run

logger = logging.getLogger(__name__)


class RddCommand(BaseCommand):
    """Shared options and report handling for the covariate-rdd commands."""

    requires_system_checks = []
    command_name = None

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # RDD_LOG_LEVEL applies unless -v is given explicitly
        parser.set_defaults(verbosity=None)
        return parser

    def add_kernel_arguments(self, parser):
        parser.add_argument(
            "-k",
            "--kernel",
            help="Kernel name: triangular, epanechnikov, uniform or custom",
            default=settings.RDD_DEFAULT_KERNEL,
        )
        parser.add_argument("--kernel-path", help="Path to a plug-in kernel module (with --kernel custom)")

    def add_output_arguments(self, parser):
        parser.add_argument("-f", "--format", help="Report format", choices=["text", "json"], default="text")
        parser.add_argument("-o", "--output-file", help="Write the report to this file instead of stdout")

    def add_fit_arguments(self, parser):
        parser.add_argument("-i", "--input-file", help="CSV file with a header row", required=True)
        parser.add_argument(
            "-b", "--bandwidth", help="Bandwidth h, or 'auto' for the rule-of-thumb value", required=True
        )
        parser.add_argument(
            "-p", "--order", help="Local polynomial order", type=int, choices=[1, 2], default=settings.RDD_DEFAULT_ORDER
        )
        parser.add_argument("-c", "--cutoff", help="Cutoff of the running variable", type=float, default=0.0)
        parser.add_argument(
            "-a", "--alpha", help="Significance level", type=float, default=settings.RDD_DEFAULT_ALPHA
        )
        parser.add_argument("--y-col", help="Outcome column", default="y")
        parser.add_argument("--x-col", help="Running variable column", default="x")
        parser.add_argument("--z-cols", help="Comma-separated covariate columns (default: z1..zp)")
        parser.add_argument("--density-bandwidth", help="Bandwidth for the density at the cutoff", type=float)
        parser.add_argument(
            "--variance-method",
            help="Plug-in variance: sample (leverage-corrected sandwich) or asymptotic (f_hat kappa(K))",
            choices=["sample", "asymptotic"],
            default="sample",
        )

    @staticmethod
    def parse_bandwidth(value):
        if value is None or value == "auto":
            return value
        try:
            return float(value)
        except ValueError:
            raise CommandError(f"usage: bandwidth must be a number or 'auto', got {value!r}.", returncode=2)

    @staticmethod
    def parse_list(value, cast=str):
        if value is None:
            return None
        if isinstance(value, (list, tuple)):
            return [cast(v) for v in value]
        try:
            return [cast(v.strip()) for v in str(value).split(",") if v.strip()]
        except ValueError:
            raise CommandError(f"usage: cannot parse list {value!r}.", returncode=2)

    def fit_config(self, options, **extra):
        return RunConfig(
            command=self.command_name,
            input_path=options["input_file"],
            kernel=options["kernel"],
            kernel_path=options.get("kernel_path"),
            bandwidth=self.parse_bandwidth(options["bandwidth"]),
            order=options["order"],
            cutoff=options["cutoff"],
            alpha=options["alpha"],
            y_col=options["y_col"],
            x_col=options["x_col"],
            z_cols=self.parse_list(options.get("z_cols")),
            density_bandwidth=options.get("density_bandwidth"),
            variance_method=options.get("variance_method", "sample"),
            output=options["format"],
            out_path=options.get("output_file"),
            **extra,
        )

    def execute_run(self, config, options):
        """Runs ``config``, writes the report, and raises CommandError with the category on failure."""
        if options.get("verbosity") is not None:
            configure_logging(options["verbosity"])
        outcome = run(config)
        if outcome.exit_code != 0:
            error = outcome.report["error"]
            raise CommandError(f"{error['category']}: {error['message']}", returncode=outcome.exit_code)
        write_report(emit_report(outcome.report, config.output), config.out_path, self.stdout)
        return outcome
