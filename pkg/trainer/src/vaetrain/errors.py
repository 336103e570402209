"""Error taxonomy for the trainer CLI."""


class ValidationError(ValueError):
    """Input data or parameters violate a documented precondition."""
