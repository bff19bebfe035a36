"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's precondition."""


class CapacityError(RuntimeError):
    """Raised when an exhaustive search or lattice scan would exceed its budget."""
