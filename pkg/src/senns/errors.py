"""Exception hierarchy shared by every senns module."""


class SennsError(Exception):
    pass


class ShapeError(SennsError, ValueError):
    """An array does not have the length or shape the network expects."""

    def __init__(self, what, expected, actual):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class ModelFormatError(SennsError, ValueError):
    pass


class ModelVersionError(ModelFormatError):
    pass


class ModelTruncatedError(ModelFormatError):
    pass


class ModelShapeError(ModelFormatError):
    pass


class DataError(SennsError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDatasetError(DataError):
    pass


class RaggedRowError(DataError):
    pass


class NonNumericError(DataError):
    pass


class IdxMagicError(DataError):
    pass


class IdxCountMismatchError(DataError):
    pass


class IdxTruncatedError(DataError):
    pass


class DegenerateClassError(SennsError, ValueError):
    """The class structure makes a normalizer zero or a heuristic undefined."""


class HyperparamError(SennsError, ValueError):
    pass


class NumericError(SennsError, ArithmeticError):
    def __init__(self, message, iteration=None):
        self.iteration = iteration
        super().__init__(message)
