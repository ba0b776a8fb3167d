"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class BranchCutError(DomainError):
    """Group logarithm requested too close to the branch cut (eigenvalue -1).

    Usually means the transport distance, i.e. hbar, is too large.
    """


class CapacityError(MemoryError):
    """Dense representation would exceed the configured size guard."""
