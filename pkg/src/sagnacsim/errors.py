"""Exception types raised across the package."""


class StateValidityError(ValueError):
    """A matrix fails the density-matrix checks (Hermitian, unit trace, PSD)."""


class NormalizationError(ValueError):
    """A spectral density does not integrate to one."""


class TruncationError(ValueError):
    """A wavelength grid is too narrow to hold a spectrum."""


class UndefinedCorrelationError(ValueError):
    """A correlation coefficient was requested from zero total counts."""


class ConfigError(ValueError):
    """A run configuration is malformed or references something unknown."""


class FixtureFormatError(ValueError):
    """A data file could not be parsed. Carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
