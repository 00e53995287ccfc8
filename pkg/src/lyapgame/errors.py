"""Exception hierarchy shared by every module.

Each class carries a short ``category`` string; the command line maps the
category to an exit status.
"""


class GameError(Exception):
    category = "error"


class ValidationError(GameError, ValueError):
    category = "validation"


class NegativeUtility(ValidationError):
    pass


class UtilityAboveCap(ValidationError):
    pass


class PmfNotNormalized(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class EmptyAlphabet(ValidationError):
    pass


class NotStaticGame(ValidationError):
    pass


class IndexOutOfRange(GameError, IndexError):
    category = "validation"


class ParseError(GameError, ValueError):
    category = "parse"

    def __init__(self, message, line=None, section=None):
        where = []
        if section is not None:
            where.append(f"section [{section}]")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.section = section


class Infeasible(GameError):
    category = "infeasible"


class Unbounded(GameError):
    category = "infeasible"


class NumericalBreakdown(GameError, ArithmeticError):
    category = "numerical"


class SizeCapExceeded(GameError):
    category = "size-cap"


class EnumerationTooLarge(SizeCapExceeded):
    pass


class ActionSpaceTooLarge(SizeCapExceeded):
    pass


class EmptyTrace(GameError, ValueError):
    category = "validation"
