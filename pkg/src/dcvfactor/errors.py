"""Exception types raised across the package.

Usage problems (bad shapes, bad arguments, unparsable files) derive from
``ValueError``; numerical breakdowns derive from ``NumericalError`` so callers
such as the CLI can map them to distinct exit codes.
"""


class NonFiniteInput(ValueError):
    pass


class EmptyMatrix(ValueError):
    pass


class DimensionError(ValueError):
    pass


class BadFoldCount(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyPanel(ValueError):
    pass


class NumericalError(ArithmeticError):
    """Base class for failures of the estimation algebra itself."""

    def __init__(self, message, fold=None, d=None):
        self.fold = fold
        self.d = d
        context = []
        if fold is not None:
            context.append(f"fold={fold}")
        if d is not None:
            context.append(f"d={d}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class RankDeficient(NumericalError):
    pass


class LeverageSaturated(NumericalError):
    pass
