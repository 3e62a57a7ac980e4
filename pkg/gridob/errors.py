"""Exception types raised by gridob."""

from typing import Any, Optional


class GridObError(RuntimeError):
    """Base class for every failure reported by the toolkit."""


class DegenerateGridError(GridObError, ValueError):
    """Grid size below 2 or markings that are not permutations."""


class CompositionError(GridObError):
    """Two domains whose endpoints do not match were composed."""


class BasisClosureError(GridObError):
    """A boundary term fell outside the assembled basis."""

    def __init__(self, message: str, key: Any = None):
        super().__init__(message)
        self.key = key


class ComplexError(GridObError):
    """The square of a differential is not zero."""

    def __init__(self, message: str, witness: Any = None, residue: Optional[dict] = None):
        super().__init__(message)
        self.witness = witness
        self.residue = residue or {}


class WindowError(GridObError):
    """A homology computation needs a grading that was not assembled."""


class SignCoverageError(GridObError):
    """A sign assignment lacks a value needed by a signed differential."""


class InfeasibleError(GridObError):
    """A linear system over F2 has no solution.

    ``certificate`` is a combination of equations that sums to 0 = 1.
    """

    def __init__(self, message: str, certificate: Any = None):
        super().__init__(message)
        self.certificate = certificate


class FamilyConstructionError(GridObError):
    """A permutation formula produced an invalid domain."""

    def __init__(self, message: str, family: str = "", index: Any = None):
        super().__init__(message)
        self.family = family
        self.index = index


class CompletionError(GridObError):
    """A chain could not be completed to a cycle in the window.

    ``residue`` is the boundary left over, when known.
    """

    def __init__(self, message: str, residue: Optional[dict] = None):
        super().__init__(message)
        self.residue = residue or {}


class ConfigError(GridObError, ValueError):
    """Invalid run configuration."""
