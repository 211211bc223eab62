from covariate_rdd.management.base import RddCommand


class Command(RddCommand):
    help = "Largest confounding level rejected for an effect threshold tau_bar, and the curve over a grid"
    command_name = "sensitivity"

    def add_arguments(self, parser):
        self.add_fit_arguments(parser)
        self.add_kernel_arguments(parser)
        self.add_output_arguments(parser)
        parser.add_argument("-t", "--tau-bar", help="Effect threshold tau_bar > 0", type=float)
        parser.add_argument("-g", "--tau-bar-grid", help="Comma-separated increasing tau_bar values")

    def handle(self, *args, **options):
        config = self.fit_config(
            options,
            tau_bar=options.get("tau_bar"),
            tau_bar_grid=self.parse_list(options.get("tau_bar_grid"), float),
        )
        self.execute_run(config, options)
