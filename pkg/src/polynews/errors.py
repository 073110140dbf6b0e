"""Exception types shared across the toolkit."""


class PolynewsError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PolynewsError):
    """Input violates a documented contract (bad labels, empty corpus, ...)."""


class CsvParseError(PolynewsError):
    """CSV could not be parsed; message carries the offending row number."""


class MatrixLoadError(PolynewsError):
    """Feature-matrix file is corrupt, truncated, or has wrong provenance."""


class ConfigError(PolynewsError):
    """Experiment configuration is unusable."""


class TrainingError(PolynewsError):
    """Model training aborted (non-finite loss, degenerate labels)."""


class StageError(PolynewsError):
    """A pipeline stage failed; carries the stage name and artifact path."""

    def __init__(self, stage: str, path, cause: Exception):
        self.stage = stage
        self.path = str(path)
        self.cause = cause
        super().__init__(f"stage {stage!r} failed at {path}: {cause}")
