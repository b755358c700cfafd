"""Error handling utilities."""
import logging
import sys
from functools import wraps
from typing import Any, Callable, Optional

from core.constants import EXIT_FAILURE
from core.exceptions import (
    CheckpointError,
    ConfigError,
    ContractError,
    FormatError,
    IMSVDError,
    NumericError,
)

logger = logging.getLogger(__name__)


def handle_errors(exit_code: int = EXIT_FAILURE, log_error: bool = True) -> Callable:
    """
    Decorator turning package errors into a process exit code.

    The wrapped function returns an exit code itself; any error escaping it is
    reported on stderr and mapped to ``exit_code``.

    Args:
        exit_code: Code returned when the wrapped function raises
        log_error: Whether to log errors through the module logger

    Returns:
        Decorated function
    """
    def decorator(func: Callable[..., int]) -> Callable[..., int]:
        @wraps(func)
        def wrapper(*args, **kwargs) -> int:
            try:
                return func(*args, **kwargs)
            except (FormatError, CheckpointError) as e:
                _report(f"Format error: {e}", log_error)
                return exit_code
            except ConfigError as e:
                _report(f"Configuration error: {e}", log_error)
                return exit_code
            except NumericError as e:
                _report(f"Numeric error: {e}", log_error)
                return exit_code
            except ContractError as e:
                _report(f"Contract violated: {e}", log_error)
                return exit_code
            except IMSVDError as e:
                _report(f"Error in {func.__name__}: {e}", log_error)
                return exit_code
            except OSError as e:
                _report(f"I/O error: {e}", log_error)
                return exit_code
            except Exception as e:
                if log_error:
                    logger.exception("Unexpected error in %s", func.__name__)
                print(f"Unexpected error in {func.__name__}: {e}", file=sys.stderr)
                return exit_code
        return wrapper
    return decorator


def _report(message: str, log_error: bool) -> None:
    if log_error:
        logger.error(message)
    print(message, file=sys.stderr)


def safe_execute(
    func: Callable,
    *args,
    default_return: Any = None,
    exception_type: Optional[type] = None,
    **kwargs
) -> Any:
    """
    Safely execute a best-effort side task.

    Args:
        func: Function to execute
        *args: Positional arguments
        default_return: Default value to return on error
        exception_type: Specific exception type to catch
        **kwargs: Keyword arguments

    Returns:
        Function result or default_return on error
    """
    try:
        return func(*args, **kwargs)
    except exception_type if exception_type else Exception as e:
        logger.warning("Error executing %s: %s", func.__name__, e)
        return default_return
