import tempfile
from pathlib import Path
from unittest import TestCase

import pytest

from covariate_rdd.errors import InvalidKernelError
from covariate_rdd.kernels import TRIANGULAR
from covariate_rdd.utils import get_kernel_class, load_kernel, resolve_kernel

HELPERS = Path(__file__).parent / "helpers.py"


class TestKernelPlugins(TestCase):
    def test_get_kernel_class(self):
        kernel_class = get_kernel_class(HELPERS)
        assert kernel_class.__name__ == "BiweightKernel"
        assert kernel_class().evaluate(0.0) == pytest.approx(15.0 / 16.0)

    def test_load_kernel_wraps_custom_spec(self):
        kernel = load_kernel(HELPERS)
        assert kernel.kind == "custom"
        assert kernel(0.5) == pytest.approx(15.0 / 16.0 * 0.75**2)
        assert kernel(1.5) == 0.0

    def test_resolve_kernel(self):
        assert resolve_kernel("triangular") is TRIANGULAR
        assert resolve_kernel("custom", HELPERS).name == "BiweightKernel"
        with pytest.raises(InvalidKernelError):
            resolve_kernel("custom")

    def test_missing_module(self):
        with pytest.raises(InvalidKernelError):
            get_kernel_class("/nonexistent/kernel.py")

    def test_module_without_kernel_class(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "no_kernel.py"
            path.write_text("VALUE = 1\n", encoding="utf-8")
            with pytest.raises(InvalidKernelError):
                get_kernel_class(path)

    def test_module_with_two_kernel_classes(self):
        source = (
            "class A:\n"
            "    @staticmethod\n"
            "    def test_config():\n"
            "        pass\n\n"
            "    def evaluate(self, u):\n"
            "        return 0.5\n\n\n"
            "class B(A):\n"
            "    pass\n"
        )
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "two_kernels.py"
            path.write_text(source, encoding="utf-8")
            with pytest.raises(InvalidKernelError, match="found 2"):
                get_kernel_class(path)
