# errors.py


class SparsekernError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SparsekernError, ValueError):
    """Invalid parameters, shapes or distributions. Maps to exit code 2."""


class DimensionMismatchError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class CombinatorialGuardError(ValidationError):
    def __init__(self, l: int, d: int, count: int, limit: int):
        super().__init__(
            f"C({l},{d}) = {count} neighborhoods exceeds the enumeration limit {limit}; "
            "use Monte Carlo features instead"
        )
        self.count = count


class NoOracleError(SparsekernError):
    """No exact kernel is known for the requested feature configuration."""


class SingularSystemError(SparsekernError):
    pass


class ConvergenceError(SparsekernError):
    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
