"""AIODeconv utility methods."""

from __future__ import annotations

import hashlib
import json
from typing import Any

import aiofiles
import numpy as np

from .exceptions import DeconvDataException
from .helpers import errors as ERROR


async def async_read_text(filename: str) -> str:
    """Read a UTF-8 text file.

    Exceptions: DeconvDataException.
    """
    try:
        async with aiofiles.open(filename, "r", encoding="utf-8") as file:
            return await file.read()
    except (OSError, UnicodeDecodeError) as ex:
        raise DeconvDataException(ERROR.READ_FAILED, filename) from ex


async def async_write_text(filename: str, text: str) -> None:
    """Write a UTF-8 text file with unix line endings."""
    async with aiofiles.open(filename, "w", encoding="utf-8", newline="\n") as file:
        await file.write(text)


def update(
    dct: dict[str, Any],
    dct_merge: dict[str, Any],
) -> dict[str, Any]:
    """Recursively merge dicts."""
    if not isinstance(dct, dict):
        return dct
    for key, value in dct_merge.items():
        if key in dct and isinstance(dct[key], dict):
            dct[key] = update(dct[key], value)
        else:
            dct[key] = value
    return dct


def config_hash(settings: dict[str, Any]) -> str:
    """Return a stable sha256 of a settings tree."""
    canonical = json.dumps(settings, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def chord_distances(x: np.ndarray, y: np.ndarray, unit: bool = True) -> np.ndarray:
    """Perpendicular distance of every point to the chord joining the ends.

    With unit scaling both axes are first mapped onto [0, 1] using the
    first and last point, so the chord becomes the diagonal.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if unit:
        x_span = x[-1] - x[0]
        y_span = y[-1] - y[0]
        x = (x - x[0]) / x_span if x_span != 0 else np.zeros_like(x)
        y = (y - y[0]) / y_span if y_span != 0 else np.zeros_like(y)
    dx = x[-1] - x[0]
    dy = y[-1] - y[0]
    length = float(np.hypot(dx, dy))
    if length == 0.0:
        return np.zeros_like(x)
    return np.abs(dy * (x - x[0]) - dx * (y - y[0])) / length
