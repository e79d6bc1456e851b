"""Exception types shared across the package."""


class KinemotionError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(KinemotionError, ValueError):
    """A caller violated a documented precondition (bad argument, shape, tag)."""


class DegenerateInputError(ContractError):
    """Input too short or empty for the requested operation."""


class InvalidDataError(KinemotionError, ValueError):
    """Data content is invalid (non-finite values, malformed numbers)."""


class ParseError(InvalidDataError):
    """A recording/annotation/metadata file failed to parse.

    Carries the file path, the 1-based line number, and the offending
    field so callers can point at the exact defect.
    """

    def __init__(self, message, path=None, line=None, field=None):
        detail = message
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            detail = f"{message} ({', '.join(where)})"
        super().__init__(detail)
        self.path = path
        self.line = line
        self.field = field


class ConfigError(KinemotionError, ValueError):
    """A model/training/CLI configuration is inconsistent or unknown."""


class TrainingDiverged(KinemotionError, ArithmeticError):
    """Training aborted on a non-finite loss.

    Records the 1-based training epoch and the 0-based batch index at
    which the divergence was observed.
    """

    def __init__(self, epoch, batch, message="non-finite loss"):
        super().__init__(f"{message} at training epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
