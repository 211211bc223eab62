from covariate_rdd.management.base import RddCommand
from covariate_rdd.runner import RunConfig


class Command(RddCommand):
    help = "Moments, kappa matrices and bias/variance constants of a kernel"
    command_name = "kernel-info"

    def add_arguments(self, parser):
        self.add_kernel_arguments(parser)
        self.add_output_arguments(parser)

    def handle(self, *args, **options):
        config = RunConfig(
            command=self.command_name,
            kernel=options["kernel"],
            kernel_path=options.get("kernel_path"),
            output=options["format"],
            out_path=options.get("output_file"),
        )
        self.execute_run(config, options)
