"""Exception types shared by all modules."""


class CoulombGraphError(Exception):
    """Base class for library errors."""


class StructuralError(CoulombGraphError):
    """Objects that must share a layout (meshes, edge counts) do not."""


class DomainError(CoulombGraphError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalError(CoulombGraphError):
    """A numerical step failed or produced an untrustworthy result."""


class InconsistencyError(CoulombGraphError):
    """Computed data violate a structural invariant (e.g. r > n - 1)."""
