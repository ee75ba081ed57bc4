"""Exception hierarchy shared by every module.

``ValidationError`` subclasses map to CLI exit code 2, ``DivergedError`` to 3.
"""


class ValidationError(ValueError):
    """Bad input or configuration."""


class InvalidArgumentError(ValidationError):
    pass


class UnusableTrackError(ValidationError):
    pass


class UnderdeterminedFitError(ValidationError):
    pass


class InfeasibleSplitError(ValidationError):
    pass


class InvalidSpaceError(ValidationError):
    pass


class NoViableConfigError(RuntimeError):
    pass


class DivergedError(RuntimeError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")
