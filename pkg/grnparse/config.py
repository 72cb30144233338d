"""Store configuration."""

from __future__ import annotations

__all__ = ["PATH", "Settings", "logger", "parse_text", "settings", "to_text"]

import pathlib
import sys
from collections.abc import Mapping
from typing import Any

from loguru import logger
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from grnparse.errors import FormatError

home = pathlib.Path.home()
cwd = pathlib.Path.cwd()
module_path = pathlib.Path(__file__).parent.absolute()
repo_path = module_path.parent


class Path:
    module = module_path
    repo = repo_path
    runs = cwd / "runs"
    tests = repo_path / "tests"


PATH = Path()


class Settings(BaseSettings):
    """Process settings, read from ``GRN_*`` environment variables.

    Attributes:
        seed: seed used by the CLI when ``--seed`` is not given.
        loglevel: loguru level of the stderr sink.
        threads: worker cap for pseudo-labelling and rectification.
    """

    model_config = SettingsConfigDict(env_prefix="GRN_")

    seed: int = 0
    loglevel: str = "INFO"
    threads: int = Field(default=1, ge=1)


settings = Settings()

logger.remove()
logger.add(
    sys.stderr,
    level=settings.loglevel,
    format="<level>{level: <8}</level> | <cyan>{name}</cyan> - {message}",
)


def to_text(values: Mapping[str, Any]) -> str:
    """``key=value`` lines with sorted keys, as echoed into run directories."""
    lines = []
    for key in sorted(values):
        value = values[key]
        if isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, tuple | list):
            value = ",".join(str(v) for v in value)
        text = str(value)
        if "\n" in text or "=" in key:
            raise FormatError(f"cannot write {key!r}={text!r} as a key=value line")
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> dict[str, str]:
    """Parses ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    values: dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise FormatError(f"line {number}: expected key=value, got {line!r}")
        values[key.strip()] = value.strip()
    return values


if __name__ == "__main__":
    print(PATH.repo)
    print(settings)
