"""Exception types shared across the toolkit."""


class NbrestoreError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(NbrestoreError, ValueError):
    """A degradation or encoder parameter is outside its valid range."""


class NoTrueAttributeError(NbrestoreError, ValueError):
    """The degradation kind has no true attribute channel; the caller must
    choose a surrogate explicitly."""


class ShapeMismatchError(NbrestoreError, ValueError):
    """Two arrays that must agree in shape do not."""


class ChainStepError(NbrestoreError, ValueError):
    """A degradation chain step failed; carries the step index."""

    def __init__(self, step_index: int, kind: str, cause: Exception):
        self.step_index = step_index
        self.kind = kind
        super().__init__(f"chain step {step_index} ({kind}): {cause}")


class ChainParseError(NbrestoreError, ValueError):
    """The chain DSL string could not be parsed; carries the column."""

    def __init__(self, message: str, column: int):
        self.column = column
        super().__init__(f"{message} (column {column})")


class CheckpointError(NbrestoreError):
    """A checkpoint file is corrupt, truncated, or incompatible."""


class DatasetError(NbrestoreError):
    """Corpus ingestion or sample generation failed."""


class TrainingDivergedError(NbrestoreError):
    """Training loss became non-finite; reports the last good checkpoint."""

    def __init__(self, epoch: int, last_checkpoint: "str | None"):
        self.epoch = epoch
        self.last_checkpoint = last_checkpoint
        where = last_checkpoint if last_checkpoint else "<none saved>"
        super().__init__(
            f"non-finite loss at epoch {epoch}; last good checkpoint: {where}"
        )
