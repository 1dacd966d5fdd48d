"""Helpers shared by the plain-text export formats."""

from datetime import datetime, timezone
from typing import IO, Mapping


def format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_param_comments(f: IO[str], params: Mapping[str, object]) -> None:
    """Write one '# key=value' comment line per parameter."""
    for key, value in params.items():
        f.write(f"# {key}={format_value(value)}\n")


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")
