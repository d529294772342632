"""Settings files, defaults and typed accessors."""

from __future__ import annotations

import configparser
import copy
import logging
from collections.abc import Iterable, Mapping, Sequence
from enum import Enum
from typing import Any, TypeVar, cast

from . import utils as UTILS
from .exceptions import DeconvUsageException
from .helpers import const as CONST
from .helpers import errors as ERROR
from .helpers.const import Enforcement, LossName, RangeMode, RegularizerName
from .helpers.models import SettingsData
from .solver import ConstraintMode, DeconvolutionConfig, LossKind, RegularizerKind

_LOGGER = logging.getLogger(__name__)

_E = TypeVar("_E", bound=Enum)


def parse_settings(text: str, filename: str = "<text>") -> dict[str, dict[str, str]]:
    """Parse an INI settings file into nested dicts.

    Exceptions: DeconvUsageException.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    try:
        parser.read_string(text, source=filename)
    except configparser.Error as ex:
        raise DeconvUsageException(ERROR.INVALID_SETTING, f"{filename}: {ex}") from ex
    layer = {section: dict(parser.items(section)) for section in parser.sections()}
    validate_layer(layer)
    return layer


async def async_load_settings(filename: str) -> dict[str, dict[str, str]]:
    """Read and parse a settings file."""
    return parse_settings(await UTILS.async_read_text(filename), filename)


def validate_layer(layer: Mapping[str, Mapping[str, Any]]) -> None:
    """Reject unknown sections and keys.

    Exceptions: DeconvUsageException.
    """
    for section, values in layer.items():
        if section not in CONST.SETTING_KEYS:
            raise DeconvUsageException(ERROR.INVALID_SETTING, f"[{section}]")
        for key in values:
            if key not in CONST.SETTING_KEYS[section]:
                raise DeconvUsageException(ERROR.INVALID_SETTING, f"{section}.{key}")


def merge_settings(*layers: Mapping[str, Mapping[str, Any]]) -> SettingsData:
    """Merge layers over the defaults, later layers winning."""
    settings = copy.deepcopy(CONST.DEFAULT_SETTINGS)
    for layer in layers:
        validate_layer(layer)
        UTILS.update(
            cast(dict, settings),
            {section: {k: str(v) for k, v in values.items()} for section, values in layer.items()},
        )
    return cast(SettingsData, settings)


def _raw(settings: Mapping[str, Mapping[str, str]], section: str, key: str) -> str:
    return str(settings[section][key]).strip()


def _invalid(section: str, key: str, value: str) -> DeconvUsageException:
    return DeconvUsageException(ERROR.INVALID_SETTING_VALUE, f"{section}.{key}={value!r}")


def as_bool(settings: Mapping[str, Mapping[str, str]], section: str, key: str) -> bool:
    """Return an on/off setting."""
    value = _raw(settings, section, key).lower()
    if value in CONST.ON_VALUES:
        return True
    if value in CONST.OFF_VALUES:
        return False
    raise _invalid(section, key, value)


def as_float(settings: Mapping[str, Mapping[str, str]], section: str, key: str) -> float:
    """Return a real setting."""
    value = _raw(settings, section, key)
    try:
        return float(value)
    except ValueError as ex:
        raise _invalid(section, key, value) from ex


def as_int(settings: Mapping[str, Mapping[str, str]], section: str, key: str) -> int:
    """Return an integer setting."""
    value = _raw(settings, section, key)
    try:
        return int(value)
    except ValueError as ex:
        raise _invalid(section, key, value) from ex


def as_enum(
    settings: Mapping[str, Mapping[str, str]], section: str, key: str, enum: type[_E]
) -> _E:
    """Return an enumerated setting."""
    value = _raw(settings, section, key).lower()
    try:
        return enum(value)
    except ValueError as ex:
        raise _invalid(section, key, value) from ex


def as_enums(
    settings: Mapping[str, Mapping[str, str]], section: str, key: str, enum: type[_E]
) -> list[_E]:
    """Return a comma separated list of enumerated values."""
    value = _raw(settings, section, key).lower()
    items = [item.strip() for item in value.split(",") if item.strip()]
    if not items:
        raise _invalid(section, key, value)
    try:
        return [enum(item) for item in items]
    except ValueError as ex:
        raise _invalid(section, key, value) from ex


def lambda_is_grid(settings: Mapping[str, Mapping[str, str]]) -> bool:
    """Return True when lambda is searched over the grid."""
    return _raw(settings, CONST.SOLVER, "lambda").lower() == CONST.LAMBDA_GRID


def marker_q_cut(settings: Mapping[str, Mapping[str, str]]) -> float:
    """Return markers.q_cut; "auto" is the stricter cut when a range filter runs."""
    if _raw(settings, CONST.MARKERS, "q_cut").lower() != CONST.Q_CUT_AUTO:
        return as_float(settings, CONST.MARKERS, "q_cut")
    if as_enum(settings, CONST.FILTERS, "range", RangeMode) is RangeMode.NONE:
        return CONST.Q_CUT
    return CONST.Q_CUT_AFTER_RANGE


def resolve_groups(text: str, celltypes: Sequence[str]) -> tuple[tuple[int, ...], ...]:
    """Turn "a,b;c" into index groups; every cell-type alone when empty.

    Exceptions: DeconvUsageException.
    """
    if not text.strip():
        return tuple((index,) for index in range(len(celltypes)))
    groups = []
    for chunk in text.split(";"):
        names = [name.strip() for name in chunk.split(",") if name.strip()]
        try:
            groups.append(tuple(celltypes.index(name) for name in names))
        except ValueError as ex:
            raise _invalid(CONST.SOLVER, "groups", text) from ex
    return tuple(groups)


def regularizer_from(
    settings: Mapping[str, Mapping[str, str]], celltypes: Sequence[str] = ()
) -> RegularizerKind:
    """Build the configured regularizer.

    A searched lambda starts at zero; the grid search replaces it.
    """
    name = as_enum(settings, CONST.SOLVER, "regularizer", RegularizerName)
    lam = 0.0 if lambda_is_grid(settings) else as_float(settings, CONST.SOLVER, "lambda")
    groups: tuple[tuple[int, ...], ...] = ()
    if name is RegularizerName.GROUP:
        groups = resolve_groups(_raw(settings, CONST.SOLVER, "groups"), celltypes)
    return RegularizerKind(name, lam, as_float(settings, CONST.SOLVER, "alpha"), groups)


def solver_configs(
    settings: Mapping[str, Mapping[str, str]], celltypes: Sequence[str] = ()
) -> list[DeconvolutionConfig]:
    """Expand losses x nn modes x sto modes, in that nesting order."""
    losses = as_enums(settings, CONST.SOLVER, "losses", LossName)
    nn_modes = as_enums(settings, CONST.SOLVER, "nn_modes", Enforcement)
    sto_modes = as_enums(settings, CONST.SOLVER, "sto_modes", Enforcement)
    regularizer = regularizer_from(settings, celltypes)
    max_iters = as_int(settings, CONST.SOLVER, "max_iters")
    params = {
        LossName.HUBER: as_float(settings, CONST.SOLVER, "huber_m"),
        LossName.EPS: as_float(settings, CONST.SOLVER, "epsilon"),
    }
    return [
        DeconvolutionConfig(
            LossKind(loss, params.get(loss)),
            ConstraintMode(nn, sto),
            regularizer,
            max_iters,
        )
        for loss in losses
        for nn in nn_modes
        for sto in sto_modes
    ]


def hashed_view(settings: Mapping[str, Mapping[str, str]]) -> dict[str, dict[str, str]]:
    """Return the settings that decide the results; the output section is left out."""
    return {
        section: dict(values)
        for section, values in settings.items()
        if section != CONST.OUTPUT
    }


def flag_name(section: str, key: str) -> str:
    """Return the command line flag mirroring a setting."""
    return f"--{section}-{key}".replace("_", "-")


def all_flags() -> Iterable[tuple[str, str, str]]:
    """Yield (section, key, flag) for every setting."""
    for section, keys in CONST.SETTING_KEYS.items():
        for key in keys:
            yield section, key, flag_name(section, key)
