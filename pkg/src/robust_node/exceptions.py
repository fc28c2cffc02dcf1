class NumericalAbort(FloatingPointError):
    """Raised when states or covectors stop being finite."""

    def __init__(self, message, node=None, iteration=None):
        self.node = node
        self.iteration = iteration
        where = []
        if iteration is not None:
            where.append(f"iteration {iteration}")
        if node is not None:
            where.append(f"time node {node}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message if field is None else f"{field}: {message}")
