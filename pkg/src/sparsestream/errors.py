"""Exception and warning types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class ParseError(ValidationError):
    """Malformed CSV input.

    ``row`` is the 1-based line number in the source (header is line 1).
    """

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class DivergenceError(ArithmeticError):
    """SGD produced a non-finite loss; usually the learning rate is too large."""

    def __init__(self, eta, epoch, block_index=None):
        where = f" in block {block_index}" if block_index is not None else ""
        super().__init__(
            f"LFA training diverged at epoch {epoch}{where} "
            f"(non-finite loss with learning rate eta={eta:g}); lower eta"
        )
        self.eta = eta
        self.epoch = epoch
        self.block_index = block_index


class DegenerateInputWarning(UserWarning):
    """A statistic was computed on degenerate input and fell back to a fixed value."""
