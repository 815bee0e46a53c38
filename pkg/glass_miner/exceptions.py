"""
Custom exceptions used by the glass patent miner.

Defines rich exceptions used across the package to signal specific error types.
Per-document and per-row problems are recorded in control files instead of
being raised; these exceptions abort a stage.
"""


class MinerError(Exception):
    """Base exception for all glass miner errors."""

    def __init__(self, message: str, **kwargs):
        """
        Initialize exception.

        Args:
            message: Error message
            **kwargs: Context parameters
        """
        super().__init__(message)
        self.message = message
        self.context = kwargs

    def __str__(self) -> str:
        """String representation with context."""
        if self.context:
            context_str = ", ".join(f"{k}={v}" for k, v in self.context.items())
            return f"{self.message} [{context_str}]"
        return self.message


class ConfigurationError(MinerError):
    """Configuration error."""
    pass


class InputError(MinerError):
    """Invalid input error."""

    def __init__(self, message: str, parameter: str = None, value: object = None, **kwargs):
        """
        Initialize.

        Args:
            message: Error message
            parameter: Parameter name
            value: Invalid value
            **kwargs: Extra parameters
        """
        super().__init__(message, parameter=parameter, value=value, **kwargs)
        self.parameter = parameter
        self.value = value


class FetchError(MinerError):
    """HTTP fetch or cache error for a single URL."""

    def __init__(self, message: str, url: str = None, **kwargs):
        super().__init__(message, url=url, **kwargs)
        self.url = url


class ExtractionError(MinerError):
    """Table extraction error."""
    pass


class ConsolidationError(MinerError):
    """CSV merge error."""

    def __init__(self, message: str, path: str = None, row: int = None, **kwargs):
        """
        Initialize.

        Args:
            message: Error message
            path: Offending file
            row: Row index inside the offending file
            **kwargs: Extra parameters
        """
        super().__init__(message, path=path, row=row, **kwargs)
        self.path = path
        self.row = row


class CurationError(MinerError):
    """Invalid curation dictionary."""
    pass


class ConversionError(MinerError):
    """Composition basis conversion error."""

    def __init__(self, message: str, oxide: str = None, **kwargs):
        super().__init__(message, oxide=oxide, **kwargs)
        self.oxide = oxide


class StageError(MinerError):
    """Pipeline stage failure."""

    def __init__(self, message: str, stage: str = None, **kwargs):
        super().__init__(message, stage=stage, **kwargs)
        self.stage = stage


class MissingInputError(StageError):
    """A stage input is missing; names the stage that produces it."""

    def __init__(self, stage: str, producer: str, path: str):
        super().__init__(
            f"Missing input for stage '{stage}': run stage '{producer}' first",
            stage=stage,
            producer=producer,
            path=path,
        )
        self.producer = producer
        self.path = path
