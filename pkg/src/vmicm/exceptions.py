"""Exception hierarchy shared across the package.

Input/validation problems derive from :class:`InputError` (CLI exit code 2),
numerical/estimation failures from :class:`ComputationError` (exit code 3).
"""


class VmicmError(Exception):
    """Base class for all package errors."""


class InputError(VmicmError):
    """Invalid user-supplied parameters, data, or files."""


class ParameterError(InputError):
    """A configuration value is outside its allowed range."""


class DomainError(InputError):
    """An index value lies outside the spline domain beyond tolerance."""


class ConstraintError(InputError):
    """A loading-vector constraint (unit norm, ``|phi| < 1``) is violated."""


class SchemaError(InputError):
    """A data file does not match the expected column/value schema."""


class ComputationError(VmicmError):
    """Numerical failure during estimation."""


class InitializationError(ComputationError):
    """The initial estimates could not be computed (rank deficiency)."""


class SolverError(ComputationError):
    """Coordinate descent failed (degenerate update, objective increase)."""


class TuningError(ComputationError):
    """No tuning-grid point produced a usable solution."""


class StudyError(ComputationError):
    """Too many simulation replicates failed to produce a report."""
