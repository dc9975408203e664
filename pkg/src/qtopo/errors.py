"""Shared exception types."""


class QtopoError(Exception):
    """Base class for all library errors."""


class ParseError(QtopoError):
    """Malformed input text; carries 1-based line and column positions."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
