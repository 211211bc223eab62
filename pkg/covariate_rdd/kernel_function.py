from typing import Protocol, runtime_checkable


@runtime_checkable
class KernelFunction(Protocol):
    """
    Protocol for plug-in kernels.
    A plug-in module defines exactly one class implementing these methods:
    1. test_config: Check that the kernel's own dependencies and parameters are usable.
    2. evaluate: Return the kernel weight at u; only called for u in [-1, 1].
    The kernel must be non-negative, symmetric and integrate to one over [-1, 1].
    """

    @staticmethod
    def test_config() -> None: ...

    def evaluate(self, u: float) -> float: ...
