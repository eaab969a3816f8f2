"""Exception hierarchy shared across the package.

Each error class carries the process exit code the CLI maps it to:
2 = usage/config, 3 = data/format, 4 = size guard.
"""


class RelpickError(Exception):
    exit_code = 1


class ConfigError(RelpickError):
    exit_code = 2


class DataError(RelpickError):
    exit_code = 3


class FormatError(DataError):
    exit_code = 3


class SizeGuardError(RelpickError):
    exit_code = 4
