"""Exception hierarchy shared across the package."""


class PtfmError(Exception):
    """Base class for every error raised by ptfm."""


class ShapeError(PtfmError, ValueError):
    pass


class DomainError(PtfmError, ValueError):
    pass


class DivergenceError(PtfmError, ArithmeticError):
    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss!r}")
        self.epoch = epoch
        self.loss = loss


class SchemaError(PtfmError, ValueError):
    """A CSV header is missing a required column."""

    def __init__(self, column, path=None):
        where = f" in {path}" if path else ""
        super().__init__(f"missing required column {column!r}{where}")
        self.column = column


class RecordError(PtfmError, ValueError):
    """A data row failed to parse or violated a FlightRecord invariant."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        prefix = f"{', '.join(loc)}: " if loc else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


class InvariantViolation(RecordError):
    pass


class ModelLoadError(PtfmError):
    pass


class FormatVersionError(ModelLoadError):
    pass


class TruncatedModelError(ModelLoadError):
    pass


class ModelShapeError(ModelLoadError):
    pass


class ComponentError(PtfmError):
    """Wraps a failure inside one named ensemble member."""

    def __init__(self, component, cause):
        super().__init__(f"{component}: {cause}")
        self.component = component
        self.cause = cause
