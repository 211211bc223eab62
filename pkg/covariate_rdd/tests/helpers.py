class BiweightKernel:
    """Plug-in kernel used by the tests: K(u) = 15/16 (1 - u^2)^2 on [-1, 1]."""

    @staticmethod
    def test_config():
        pass

    def evaluate(self, u):
        return 15.0 / 16.0 * (1.0 - u * u) ** 2
