"""Exception types shared across the package.

The CLI maps these onto process exit codes: contract and domain
violations exit 2, malformed files exit 3, numerical aborts exit 4.
"""


class ContractError(ValueError):
    """An argument violates a documented precondition."""


class DomainError(ValueError):
    """A numeric input falls outside an operation's documented domain."""


class FormatError(ValueError):
    """A serialized artifact is malformed.

    `offset` is the byte position at which parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalAbort(RuntimeError):
    """Training produced a non-finite quantity and stopped."""
