"""Exception hierarchy shared across the package."""


class IsoshiftError(Exception):
    """Base class for all package errors."""


class GridMismatchError(IsoshiftError):
    """Operands live on different degree grids."""


class GridOverflowError(IsoshiftError):
    """A strict-mode operation pushed nonzero coefficients off the grid."""


class SchemaError(IsoshiftError):
    """A JSON payload does not match the documented wire format."""


class PreconditionError(IsoshiftError):
    """A numerical precondition of an operation failed."""


class GridTooSmallError(PreconditionError):
    """The truncation grid is too small for the requested construction."""


class NotAShiftError(PreconditionError):
    """The product isometry has no wandering vectors on the grid."""


class NotCommutingError(PreconditionError):
    """Input operators fail to commute on the validity window."""


class NotInvariantError(PreconditionError):
    """A subspace is not invariant under the required operators."""


class LayoutError(PreconditionError):
    """An orthogonal decomposition came out dimensionally inconsistent."""
