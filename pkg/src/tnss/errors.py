"""Exception types shared across the package."""

from __future__ import annotations


class TnssError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(TnssError, ValueError):
    pass


class NotRepresentableError(TnssError, ValueError):
    """A value cannot be expressed over the given prime basis."""


class DegenerateBasisError(TnssError, ValueError):
    """The lattice basis is rank deficient."""


class CapacityError(TnssError):
    """A request exceeds a hard size limit (e.g. 2^n enumeration)."""


class DomainError(TnssError, ValueError):
    pass


class ConsistencyError(TnssError, AssertionError):
    """An internal invariant was violated; indicates a bug, not bad input."""


class EigensolverError(TnssError, RuntimeError):
    def __init__(self, message: str, node: int | None = None):
        super().__init__(message if node is None else f"{message} (tensor node {node})")
        self.node = node
