"""Training config files and their precedence against defaults and flags."""
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from core.exceptions import ConfigError, FormatError
from core.keyvalue import read_key_values
from training.config import TrainConfig

logger = logging.getLogger(__name__)


def load_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read a flat ``key=value`` config file.

    Keys are TrainConfig field names; ``lambda`` and ``lambda_`` are both accepted.

    Raises:
        ConfigError: If the file cannot be read or parsed
    """
    try:
        values = read_key_values(path)
    except FormatError as e:
        raise ConfigError(str(e)) from e
    logger.debug("Loaded %d keys from %s", len(values), path)
    return values


def resolve_config(
    config_path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> TrainConfig:
    """
    Defaults, then the config file, then flag overrides; later sources win.

    Raises:
        ConfigError: On an unreadable file, an unknown key or an invalid value
    """
    values: Dict[str, Any] = {}
    if config_path is not None:
        for key, value in load_config_file(config_path).items():
            values["lambda_" if key == "lambda" else key] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            values["lambda_" if key == "lambda" else key] = value
    return TrainConfig.build(values)
