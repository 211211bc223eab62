from covariate_rdd import settings
from covariate_rdd.management.base import RddCommand
from covariate_rdd.runner import RunConfig


class Command(RddCommand):
    help = "Check a DGP against the regularity conditions and report its population quantities"
    command_name = "validate"

    def add_arguments(self, parser):
        parser.add_argument("-d", "--dgp", help="Built-in DGP name (dgp1, dgp2, dgp3) or a DGP file", required=True)
        parser.add_argument(
            "-p", "--order", help="Local polynomial order", type=int, choices=[1, 2], default=settings.RDD_DEFAULT_ORDER
        )
        self.add_kernel_arguments(parser)
        self.add_output_arguments(parser)

    def handle(self, *args, **options):
        config = RunConfig(
            command=self.command_name,
            kernel=options["kernel"],
            kernel_path=options.get("kernel_path"),
            order=options["order"],
            dgp=options["dgp"],
            output=options["format"],
            out_path=options.get("output_file"),
        )
        self.execute_run(config, options)
