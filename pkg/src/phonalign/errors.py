"""Exception hierarchy. Each error carries a stable ``code`` string and the
CLI exit status associated with its family."""


class AlignmentError(Exception):
    exit_code = 1

    def __init__(self, code, message="", *, line=None):
        self.code = code
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{code}{where}: {message}" if message else f"{code}{where}")


class ParseError(AlignmentError):
    """Malformed input file."""

    exit_code = 2


class ContractError(AlignmentError):
    """Inputs parse but violate a dimension, unit or precondition contract."""

    exit_code = 3


class InfeasibleError(AlignmentError):
    """The requested computation has no admissible solution."""

    exit_code = 4
