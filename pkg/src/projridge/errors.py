"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid input: bad shapes, out-of-domain parameters, malformed files."""


class NumericalError(RuntimeError):
    """A computation failed for numerical reasons."""
