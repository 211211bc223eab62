from covariate_rdd.management.base import RddCommand


class Command(RddCommand):
    help = "Estimate the jump at the cutoff with the covariate-adjusted local polynomial fit"
    command_name = "estimate"

    def add_arguments(self, parser):
        self.add_fit_arguments(parser)
        self.add_kernel_arguments(parser)
        self.add_output_arguments(parser)

    def handle(self, *args, **options):
        self.execute_run(self.fit_config(options), options)
