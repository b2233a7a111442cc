class InputError(ValueError):
    """Malformed or out-of-range input (bad dimensions, empty sets, bad files)."""


class ContractViolation(RuntimeError):
    """A property that a construction guarantees was found to fail."""
