"""Error taxonomy shared by the library, the service, and the CLI.

ConfigError covers invalid parameters or experiment configuration and maps
to CLI exit code 1; NumericalError covers numerical failures such as
Riccati non-convergence and maps to exit code 2.
"""


class ConfigError(ValueError):
    """Invalid system parameters or experiment configuration."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-convergence, undefined constant)."""
