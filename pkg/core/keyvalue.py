"""Flat ``key=value`` text files used for configs and manifests, read with python-dotenv."""
from pathlib import Path
from typing import Dict, Mapping, Union

from dotenv import dotenv_values

from core.exceptions import FormatError


def read_key_values(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read a dotenv-style file; blank lines and ``#`` comments are skipped.

    Variable interpolation is off, so values come back verbatim.

    Raises:
        FormatError: If the file is missing or a line carries a key without ``=``
    """
    path = Path(path)
    if not path.is_file():
        raise FormatError("cannot read: no such file", path)
    try:
        raw = dotenv_values(dotenv_path=path, interpolate=False, encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise FormatError(f"cannot read: {e}", path) from e
    missing = [key for key, value in raw.items() if value is None]
    if missing:
        raise FormatError(f"expected key=value for {', '.join(missing)}", path)
    return {key: value for key, value in raw.items() if value is not None}


def write_key_values(path: Union[str, Path], values: Mapping[str, object]) -> Path:
    """Write one ``key=value`` line per entry, keys sorted."""
    path = Path(path)
    lines = [f"{key}={_format(values[key])}" for key in sorted(values)]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot write: {e}", path) from e
    return path


def _format(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format(v) for v in value)
    if hasattr(value, "value"):  # enums
        return str(value.value)
    return str(value)
