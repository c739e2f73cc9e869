"""Exception taxonomy shared across the package.

ConfigError covers anything a user can fix by changing inputs (bad pipeline
specs, incompatible shapes, invalid hyperparameters); the CLI maps it to exit
code 2.  NumericsError covers runtime failures such as NaN losses; exit code 3.
"""


class ConfigError(ValueError):
    """Invalid configuration, spec string, or shape combination."""


class NumericsError(RuntimeError):
    """Non-finite value detected where the math requires finiteness."""
