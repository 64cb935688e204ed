"""Shared exception types."""


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its accuracy contract.

    Carries context such as the achieved residual or the offending layer.
    """


class ConfigError(ValueError):
    """Run-configuration text failed validation.

    `problems` lists every issue found, each naming the key and line.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
