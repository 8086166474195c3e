"""Exception hierarchy."""

import numpy as np


class CombSteerError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(CombSteerError, ValueError):
    """Matrix shape is not 2N x 2N for an integer N, or sizes disagree."""


class NotPositiveDefiniteError(CombSteerError, np.linalg.LinAlgError):
    pass


class UnphysicalStateError(CombSteerError, ValueError):
    """A covariance matrix violates the uncertainty principle."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class IllConditionedError(CombSteerError, np.linalg.LinAlgError):
    """The steering-party block is too ill-conditioned to invert safely."""


class NumericalDegeneracyError(CombSteerError, np.linalg.LinAlgError):
    """Eigenvalues of ``i Omega sigma`` could not be paired as +/- nu."""


class PartitionError(CombSteerError, ValueError):
    """Invalid bipartition or mode group."""


class LabelError(CombSteerError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ModelError(CombSteerError, ValueError):
    """Invalid comb model."""


class ParseError(CombSteerError, ValueError):
    """Malformed input file; ``line`` and ``column`` are 1-based when known."""

    def __init__(self, message, source=None, line=None, column=None):
        self.source, self.line, self.column = source, line, column
        where = ":".join(str(x) for x in (source, line, column) if x is not None)
        super().__init__(f"{where}: {message}" if where else message)
