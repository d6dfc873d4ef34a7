"""Scenario files (TOML) and their validation.

Example::

    duration_ms = 2000

    [channel]
    loss = 0.0
    delay_us = 50
    seed = 7

    [[nodes]]
    mac = "02:00:00:00:00:01"
    metric = 300
    ppm = 5

    [[traffic]]
    kind = "ping"
    src = "02:00:00:00:00:01"
    dst = "02:00:00:00:00:02"
    at_ms = 500
    count = 10

    [[links]]
    at_ms = 1500
    a = "02:00:00:00:00:01"
    b = "02:00:00:00:00:02"
    state = "down"
"""

from __future__ import annotations

import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib
from pathlib import Path
from typing import Any, Mapping

from pydantic import ValidationError

from app.core.errors import InvalidScenario
from app.schemas.schemas import Scenario


def _location(loc: tuple) -> str:
    return ".".join(str(part) for part in loc) or "scenario"


def parse_scenario(data: Mapping[str, Any]) -> Scenario:
    """Validate a scenario mapping.

    Raises:
        InvalidScenario: with the dotted location of the first problem.
    """
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise InvalidScenario(first["msg"], _location(first["loc"])) from exc


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file.

    Raises:
        InvalidScenario: unreadable file, TOML syntax error or invalid content.
    """
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except OSError as exc:
        raise InvalidScenario(str(exc), str(path)) from exc
    except tomllib.TOMLDecodeError as exc:
        raise InvalidScenario(str(exc), str(path)) from exc
    return parse_scenario(data)
