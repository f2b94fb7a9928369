"""Exception hierarchy shared by every module."""


class CedlError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(CedlError, ValueError):
    """An argument violates an operation's preconditions."""


class DomainError(InvalidInputError):
    """A special function was evaluated outside its domain."""


class ConfigError(CedlError, ValueError):
    """Unknown option, mismatched metric, or inconsistent configuration."""


class ParseError(CedlError, ValueError):
    """A persisted file could not be decoded.

    Attributes:
        path: file being read, if known.
        offset: byte offset (binary formats) or None.
        line: 1-based line number (text formats) or None.
    """

    def __init__(self, message, path=None, offset=None, line=None):
        self.path = path
        self.offset = offset
        self.line = line
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        prefix = f"{': '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ShapeError(ParseError):
    """Decoded arrays disagree with the shapes declared in a header."""
