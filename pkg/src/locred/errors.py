"""Exception hierarchy shared across the package."""


class LocredError(Exception):
    """Base class for all package errors."""


class StructureError(LocredError):
    """Malformed or inconsistent input (lengths, indices, labels, schemas)."""


class NonHermitianError(StructureError):
    """A Hamiltonian that should be Hermitian carries complex weight."""


class ResourceLimitError(LocredError):
    """Requested dense realization exceeds the configured qubit cap."""


class GapCollapseError(LocredError):
    """Branch classification failed: a degeneracy group straddles the
    physical/ancilla cut, so the two branches cannot be separated."""


class UnconvergedError(LocredError):
    """An optimization did not reach the requested tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
