import importlib.util
import inspect
import logging
import sys
from pathlib import Path

from covariate_rdd.errors import InvalidKernelError
from covariate_rdd.kernel_function import KernelFunction
from covariate_rdd.kernels import KernelSpec, get_kernel

logger = logging.getLogger(__name__)


def _get_kernel_module(path):
    path = Path(path)
    if not path.is_file():
        raise InvalidKernelError(f"Plug-in kernel module {path} does not exist.")
    module_name = path.stem

    if module_name in sys.modules and getattr(sys.modules[module_name], "__file__", None) == str(path.resolve()):
        return sys.modules[module_name]

    spec = importlib.util.spec_from_file_location(module_name, path.resolve().as_posix())
    module = importlib.util.module_from_spec(spec)
    sys.modules[module_name] = module
    try:
        spec.loader.exec_module(module)
    except (ImportError, SyntaxError) as e:
        del sys.modules[module_name]
        raise InvalidKernelError(f"Plug-in kernel module {path} failed to import: {e}") from e
    return module


def get_kernel_class(path):
    """Returns the single KernelFunction class defined in the module at ``path``."""
    kernel_module = _get_kernel_module(path)
    classes = []
    for _, obj in inspect.getmembers(kernel_module, inspect.isclass):
        # Filter out imported classes and only include classes defined in this module
        if obj.__module__ == kernel_module.__name__ and issubclass(obj, KernelFunction):
            classes.append(obj)
    if len(classes) != 1:
        raise InvalidKernelError(
            f"Expected exactly one KernelFunction class in {kernel_module.__name__}, found {len(classes)}"
        )
    return classes[0]


def load_kernel(path) -> KernelSpec:
    """Instantiates the plug-in kernel at ``path`` and wraps it as a validated custom KernelSpec."""
    kernel_class = get_kernel_class(path)
    kernel_class.test_config()
    instance = kernel_class()
    logger.info("Loaded plug-in kernel %s from %s", kernel_class.__name__, path)
    return KernelSpec("custom", evaluator=instance.evaluate, label=kernel_class.__name__)


def resolve_kernel(name, path=None) -> KernelSpec:
    """Turns a kernel name (or ``custom`` plus a plug-in path) into a KernelSpec."""
    if name == "custom":
        if not path:
            raise InvalidKernelError("The custom kernel needs a plug-in module path.")
        return load_kernel(path)
    return get_kernel(name)
