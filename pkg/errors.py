"""Exception hierarchy shared by the library modules and the CLI.

Library code raises; only `cli.run` turns these into exit codes and the
one-line `error[CODE]:` messages.
"""
from __future__ import annotations

from typing import Optional, Sequence


class SpectralError(Exception):
    """Base class for every error this package raises on purpose.

    Exit codes: 0 ok, 1 usage, 2 data, 3 numerical, 4 internal bug. Code 4
    is also what `cli.run` returns for any exception outside this tree.
    """

    code = 'internal'
    exit_code = 4


class UsageError(SpectralError, ValueError):
    """Bad flags, out-of-range parameters or violated preconditions."""

    code = 'usage'
    exit_code = 1


class DataError(SpectralError, ValueError):
    """Input data is malformed or inconsistent."""

    code = 'data'
    exit_code = 2


class NumericalError(SpectralError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy answer."""

    code = 'numerical'
    exit_code = 3


class GraphFormatError(DataError):
    """Edge-list parse failure, self-loop or duplicate edge."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegreeError(DataError):
    """A spectral operation met a vertex of degree 0."""

    def __init__(self, vertex: int):
        self.vertex = vertex
        super().__init__(
            f"vertex {vertex} has degree 0; spectral operations need deg >= 1")


class PartitionError(DataError):
    """Partition labels are invalid or do not match the graph."""


class EmptyClusterError(PartitionError):
    def __init__(self, clusters: Sequence[int]):
        self.clusters = list(clusters)
        super().__init__(
            f"empty clusters {self.clusters}; see the clustering trace for the "
            "iteration that exhausted the vertex set")


class ConductanceError(DataError):
    """Internal conductance is undefined or too expensive for the request."""


class ConvergenceError(NumericalError):
    """The eigensolver ran out of iterations."""

    def __init__(self, message: str, residuals: Sequence[float] = ()):
        self.residuals = [float(r) for r in residuals]
        if self.residuals:
            worst = max(self.residuals)
            message = f"{message} (worst residual achieved {worst:.3e})"
        super().__init__(message)
