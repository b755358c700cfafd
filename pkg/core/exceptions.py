"""Custom exceptions for the application."""
from pathlib import Path
from typing import Optional, Union


class IMSVDError(Exception):
    """Base class for every error raised on purpose by this package."""
    pass


class ContractError(IMSVDError):
    """Raised when a caller violates an operation's precondition."""
    pass


class DimensionError(ContractError):
    """Raised when array shapes do not agree."""
    pass


class LayoutError(ContractError):
    """Raised when a width is inconsistent with the block layout."""
    pass


class NumericError(IMSVDError):
    """Raised when a non-finite value shows up where finite values are required."""
    pass


class CapacityError(IMSVDError):
    """Raised when a request exceeds a hard size limit."""
    pass


class ConfigError(IMSVDError):
    """Raised when configuration cannot be parsed or validated."""
    pass


class FormatError(IMSVDError):
    """Raised when a file does not match its expected format."""

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            message = f"{self.path}: {message}"
        super().__init__(message)


class CheckpointError(FormatError):
    """Raised when a checkpoint cannot be written or read back."""
    pass
