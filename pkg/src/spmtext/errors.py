"""Exception hierarchy shared by every module of the package."""


class SpmError(Exception):
    """Base class for all errors raised by :mod:`spmtext`."""


class InvalidArgument(SpmError, ValueError):
    pass


class ZeroNorm(SpmError, ValueError):
    pass


class DimensionMismatch(SpmError, ValueError):
    pass


class DegenerateResultant(SpmError, ArithmeticError):
    """The sum of a set of directions is too short to define a direction."""


class DegenerateCluster(SpmError, ArithmeticError):
    pass


class ParseError(SpmError, ValueError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class EmptyCorpus(SpmError, ValueError):
    pass


class EmptyDocument(SpmError, ValueError):
    pass


class FingerprintMismatch(SpmError, ValueError):
    pass


class SingleClass(SpmError, ValueError):
    pass


class TooFewExamples(SpmError, ValueError):
    pass


class LengthMismatch(SpmError, ValueError):
    pass
