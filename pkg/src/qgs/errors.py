"""Exception types shared across the package."""


class GraphValidationError(ValueError):
    """Input graph, condition or configuration is invalid.

    The message always names the offending vertex, edge or field.
    """


class NumericalError(RuntimeError):
    """A numerical routine could not reach its accuracy target."""
