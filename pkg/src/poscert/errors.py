"""Exception types shared by all poscert modules.

The CLI maps these onto exit codes: ``ParseError`` -> 2, ``ResourceCapError`` -> 3,
everything else -> 1.
"""


class PoscertError(Exception):
    pass


class ParseError(PoscertError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class PreconditionError(PoscertError, ValueError):
    """Input violates an operation's precondition."""


class ModeError(PreconditionError):
    """A closure rule was used in a mode where the cone is not closed under it."""


class CertificationFailure(PoscertError):
    """A construction did not produce a certificate.

    This is never a proof of non-membership; ``refuted`` is set only when a
    concrete point shows the input violates the positivity hypothesis.
    """

    refuted = False


class ResourceCapError(PoscertError):
    """A configured size cap was hit before the construction could finish."""
