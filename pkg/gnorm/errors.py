from typing import Any, Optional


class GnormError(Exception):
    """Base class of all errors raised by gnorm."""


class InputError(GnormError, ValueError):
    """Invalid user input: presentations, words, ring elements, configurations."""


class PresentationSyntaxError(InputError):
    def __init__(self, message: str, line: int, column: int) -> None:
        self.line = line
        self.column = column
        super().__init__("{} (line {}, column {})".format(message, line, column))


class UnknownGeneratorError(InputError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__("Unknown generator '{}'".format(name))


class StructureClassError(InputError):
    """The declared structure class does not match the relators or the operation."""


class AlphabetMismatchError(InputError):
    pass


class ResourceLimitError(GnormError, RuntimeError):
    def __init__(
        self, limit: str, value: int, cap: int, partial: Optional[Any] = None
    ) -> None:
        self.limit = limit
        self.value = value
        self.cap = cap
        self.partial = partial
        super().__init__(
            "Resource limit '{}' exceeded: {} > {}".format(limit, value, cap)
        )


class CertificationError(GnormError, RuntimeError):
    pass


class ElementSyntaxError(InputError):
    def __init__(self, message: str, column: int) -> None:
        self.column = column
        super().__init__("{} (column {})".format(message, column))
