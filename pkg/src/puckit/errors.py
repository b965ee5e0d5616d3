"""Exception types.  Each maps onto one CLI exit code."""


class PuckitError(Exception):
    exit_code = 1


class ConfigError(PuckitError, ValueError):
    """Invalid configuration value."""

    exit_code = 2


class DatasetFormatError(PuckitError, ValueError):
    """Malformed dataset file (ragged rows, missing columns, empty file)."""

    exit_code = 2


class DatasetValidationError(PuckitError, ValueError):
    """Well-formed file whose values break the data model."""

    exit_code = 2


class IncompatibleError(PuckitError, ValueError):
    """Model and data (or source and target) disagree on feature dimension."""

    exit_code = 3


class MissingLabelsError(PuckitError, ValueError):
    """Gold labels are required but absent for some samples."""

    exit_code = 4

    def __init__(self, ids):
        self.ids = [int(i) for i in ids]
        shown = ", ".join(str(i) for i in self.ids[:20])
        more = "" if len(self.ids) <= 20 else f" (+{len(self.ids) - 20} more)"
        super().__init__(f"missing gold labels for ids: {shown}{more}")


class TrainingError(PuckitError, RuntimeError):
    """Non-finite loss during optimisation."""

    def __init__(self, step: int, lr: float, loss: float):
        self.step = step
        self.lr = lr
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at step {step} (lr={lr!r})")
