"""Exception hierarchy. Each class carries the process exit code the CLI uses."""


class NilmError(Exception):
    exit_code = 1


class ConfigurationError(NilmError):
    exit_code = 2


class InputError(NilmError):
    exit_code = 3


class DegenerateClusterError(InputError):
    """All clustered values are identical, so no ON/OFF split exists."""


class NumericalError(NilmError):
    exit_code = 4
