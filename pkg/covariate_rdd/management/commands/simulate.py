from covariate_rdd import settings
from covariate_rdd.management.base import RddCommand
from covariate_rdd.runner import H_RULES, RunConfig


class Command(RddCommand):
    help = "Monte Carlo replications of the estimator on a built-in or file-defined DGP"
    command_name = "simulate"

    def add_arguments(self, parser):
        parser.add_argument("-d", "--dgp", help="Built-in DGP name (dgp1, dgp2, dgp3) or a DGP file", required=True)
        parser.add_argument("-n", "--n", help="Sample size per replication", type=int, required=True)
        parser.add_argument("-r", "--reps", help="Number of replications", type=int, required=True)
        parser.add_argument("-s", "--seed", help="Master seed; generated and recorded when omitted", type=int)
        parser.add_argument("-b", "--bandwidth", help="Fixed bandwidth (overrides --h-rule)", type=float)
        parser.add_argument("--h-rule", help="Bandwidth rate in n", choices=list(H_RULES), default="n^-1/3")
        parser.add_argument("--h-scale", help="Constant multiplying the bandwidth rate", type=float, default=1.0)
        parser.add_argument(
            "-p", "--order", help="Local polynomial order", type=int, choices=[1, 2], default=settings.RDD_DEFAULT_ORDER
        )
        parser.add_argument(
            "-a", "--alpha", help="Significance level", type=float, default=settings.RDD_DEFAULT_ALPHA
        )
        parser.add_argument(
            "--no-covariates", help="Fit without the covariates", action="store_true", default=False
        )
        parser.add_argument(
            "-w", "--workers", help="Worker threads", type=int, default=settings.RDD_SIMULATION_WORKERS
        )
        parser.add_argument("--per-rep-csv", help="Write per-replication values to this CSV file")
        self.add_kernel_arguments(parser)
        self.add_output_arguments(parser)

    def handle(self, *args, **options):
        config = RunConfig(
            command=self.command_name,
            kernel=options["kernel"],
            kernel_path=options.get("kernel_path"),
            bandwidth=options.get("bandwidth"),
            order=options["order"],
            alpha=options["alpha"],
            dgp=options["dgp"],
            n=options["n"],
            reps=options["reps"],
            seed=options.get("seed"),
            h_rule=options["h_rule"],
            h_scale=options["h_scale"],
            covariates=not options["no_covariates"],
            workers=options["workers"],
            per_rep_csv=options.get("per_rep_csv"),
            output=options["format"],
            out_path=options.get("output_file"),
        )
        self.execute_run(config, options)
