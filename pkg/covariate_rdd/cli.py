import importlib
import logging
import sys

from django.core.exceptions import ImproperlyConfigured

from covariate_rdd.config import RddConfig
from covariate_rdd.errors import RddError

logger = logging.getLogger(__name__)

PROG = "covariate-rdd"
COMMANDS = {
    "estimate": "estimate",
    "sensitivity": "sensitivity",
    "simulate": "simulate",
    "kernel-info": "kernel_info",
    "validate": "validate",
}
EXIT_USAGE = 2


def usage():
    lines = [f"usage: {PROG} <command> [options]", "", "Commands:"]
    lines.extend(f"  {name}" for name in COMMANDS)
    lines.append(f"\nRun '{PROG} <command> --help' for the options of a command.")
    return "\n".join(lines) + "\n"


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help", "help"):
        sys.stdout.write(usage())
        return 0 if argv else EXIT_USAGE
    name = argv[0]
    if name not in COMMANDS:
        sys.stderr.write(f"Unknown command '{name}'.\n\n{usage()}")
        return EXIT_USAGE

    try:
        RddConfig().ready()
    except ImproperlyConfigured as e:
        sys.stderr.write(f"configuration: {e}\n")
        return EXIT_USAGE
    except RddError as e:
        sys.stderr.write(f"configuration: plug-in kernel failed to load: {e}\n")
        return EXIT_USAGE

    module = importlib.import_module(f"covariate_rdd.management.commands.{COMMANDS[name]}")
    # run_from_argv exits with the CommandError return code on failure
    module.Command().run_from_argv([PROG, name, *argv[1:]])
    return 0


if __name__ == "__main__":
    sys.exit(main())
