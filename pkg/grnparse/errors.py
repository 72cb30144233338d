"""Exceptions raised by grnparse.

Every error derives from :class:`GrnError` and from the builtin exception a
caller would naturally catch, so ``except ValueError`` keeps working around
shape and data problems.
"""

__all__ = [
    "GrnError",
    "ContractViolation",
    "NumericError",
    "DataError",
    "FormatError",
    "ConfigError",
    "CheckError",
    "StageError",
]


class GrnError(Exception):
    """Base class of all grnparse errors."""


class ContractViolation(GrnError, ValueError):
    """An operation precondition (mostly shapes) does not hold."""


class NumericError(GrnError, ArithmeticError):
    """Non-finite values entered or left a computation."""


class DataError(GrnError, ValueError):
    """Labels, masks or samples are invalid."""


class FormatError(DataError):
    """A PPM/PGM/manifest/checkpoint file is malformed."""


class ConfigError(GrnError, ValueError):
    """A configuration value is invalid."""


class CheckError(GrnError, AssertionError):
    """A gradient check could not be carried out."""


class StageError(GrnError, RuntimeError):
    """A self-learning stage failed.

    Args:
        stage: name of the failing stage.
        message: what went wrong.
    """

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage
