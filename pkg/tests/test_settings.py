"""Test settings files, layering and the solver configuration grid."""

import pytest

from aiodeconv import exceptions
from aiodeconv import settings as SETTINGS
from aiodeconv import utils as UTILS
from aiodeconv.helpers import const as CONST
from aiodeconv.helpers.const import (
    Enforcement,
    LossName,
    RegularizerName,
    ViolationScope,
)
from tests import fixture_path, load_fixture


@pytest.mark.asyncio
async def test_load_settings() -> None:
    """Test reading an INI file."""
    layer = await SETTINGS.async_load_settings(fixture_path("settings.ini"))
    assert layer["filters"] == {"sto_violation": "on", "sto_scope": "any_sample"}
    assert layer["eval"]["seed"] == "7"

    with pytest.raises(exceptions.DeconvUsageException, match="solver.loss"):
        SETTINGS.parse_settings(load_fixture("unknown_key.ini"), "unknown_key.ini")
    with pytest.raises(exceptions.DeconvUsageException, match=r"\[plots\]"):
        SETTINGS.parse_settings("[plots]\nwidth = 3\n")
    with pytest.raises(exceptions.DeconvUsageException):
        SETTINGS.parse_settings("no section header\n")
    with pytest.raises(exceptions.DeconvDataException):
        await SETTINGS.async_load_settings(fixture_path("missing.ini"))


def test_merge_settings() -> None:
    """Test defaults, then file, then flags."""
    settings = SETTINGS.merge_settings()
    assert settings == CONST.DEFAULT_SETTINGS
    assert settings is not CONST.DEFAULT_SETTINGS

    file_layer = SETTINGS.parse_settings(load_fixture("settings.ini"))
    flags = {"eval": {"seed": 9}, "solver": {"losses": "huber"}}
    settings = SETTINGS.merge_settings(file_layer, flags)
    assert settings["eval"]["seed"] == "9"
    assert settings["eval"]["samples"] == "200"
    assert settings["solver"]["losses"] == "huber"
    assert settings["solver"]["nn_modes"] == "explicit"
    assert settings["output"]["directory"] == "results"

    # Defaults stay untouched
    assert CONST.DEFAULT_SETTINGS["eval"]["seed"] == "0"

    with pytest.raises(exceptions.DeconvUsageException):
        SETTINGS.merge_settings({"solver": {"loss": "l2"}})


def test_accessors() -> None:
    """Test the typed accessors."""
    settings = SETTINGS.merge_settings(
        {
            "filters": {"sto_violation": "Yes", "sto_scope": "ANY_SAMPLE"},
            "solver": {"losses": " l1 , eps ", "max_iters": "50", "lambda": "Grid"},
        }
    )
    assert SETTINGS.as_bool(settings, "filters", "sto_violation")
    assert SETTINGS.as_bool(settings, "solver", "param_search")
    assert SETTINGS.as_enum(settings, "filters", "sto_scope", ViolationScope) is (
        ViolationScope.ANY_SAMPLE
    )
    assert SETTINGS.as_enums(settings, "solver", "losses", LossName) == [
        LossName.L1,
        LossName.EPS,
    ]
    assert SETTINGS.as_int(settings, "solver", "max_iters") == 50
    assert SETTINGS.as_float(settings, "solver", "huber_m") == 1.0
    assert SETTINGS.lambda_is_grid(settings)

    # Test the marker q-value cut
    assert SETTINGS.marker_q_cut(settings) == CONST.Q_CUT
    assert SETTINGS.marker_q_cut(SETTINGS.merge_settings({"markers": {"q_cut": "auto"}})) == 1e-3
    ranged = SETTINGS.merge_settings({"markers": {"q_cut": "AUTO"}, "filters": {"range": "fixed"}})
    assert SETTINGS.marker_q_cut(ranged) == 1e-5
    ranged["markers"]["q_cut"] = "0.05"
    assert SETTINGS.marker_q_cut(ranged) == 0.05
    assert settings["filters"]["range_lo"] == "3"
    assert settings["filters"]["range_hi"] == "12"

    # Test the invalid values
    bad = SETTINGS.merge_settings(
        {
            "filters": {"sto_violation": "maybe", "sto_scope": "everywhere"},
            "solver": {"losses": ",", "max_iters": "1.5", "huber_m": "one"},
        }
    )
    for call in (
        lambda: SETTINGS.as_bool(bad, "filters", "sto_violation"),
        lambda: SETTINGS.as_enum(bad, "filters", "sto_scope", ViolationScope),
        lambda: SETTINGS.as_enums(bad, "solver", "losses", LossName),
        lambda: SETTINGS.as_int(bad, "solver", "max_iters"),
        lambda: SETTINGS.as_float(bad, "solver", "huber_m"),
    ):
        with pytest.raises(exceptions.DeconvUsageException):
            call()


def test_solver_configs() -> None:
    """Test the loss x nn x sto expansion."""
    configs = SETTINGS.solver_configs(SETTINGS.merge_settings())
    assert len(configs) == 16
    assert [config.loss.name for config in configs[:4]] == [LossName.L2] * 4
    assert [
        (config.constraints.nn, config.constraints.sto) for config in configs[:4]
    ] == [
        (Enforcement.IMPLICIT, Enforcement.IMPLICIT),
        (Enforcement.IMPLICIT, Enforcement.EXPLICIT),
        (Enforcement.EXPLICIT, Enforcement.IMPLICIT),
        (Enforcement.EXPLICIT, Enforcement.EXPLICIT),
    ]
    assert configs[8].loss.param == 1.0
    assert configs[12].loss.param == 0.5
    assert not configs[0].regularizer.active

    settings = SETTINGS.merge_settings(
        {
            "solver": {
                "losses": "huber",
                "nn_modes": "explicit",
                "sto_modes": "explicit",
                "huber_m": "2.5",
                "regularizer": "group",
                "lambda": "0.1",
                "groups": "A,B;C",
            }
        }
    )
    (config,) = SETTINGS.solver_configs(settings, ("A", "B", "C"))
    assert config.loss.param == 2.5
    assert config.regularizer.name is RegularizerName.GROUP
    assert config.regularizer.lam == 0.1
    assert config.regularizer.groups == ((0, 1), (2,))


def test_groups_and_flags() -> None:
    """Test group parsing, hashing and flag names."""
    assert SETTINGS.resolve_groups("", ("A", "B")) == ((0,), (1,))
    assert SETTINGS.resolve_groups("B; A", ("A", "B")) == ((1,), (0,))
    with pytest.raises(exceptions.DeconvUsageException):
        SETTINGS.resolve_groups("A,Z", ("A", "B"))

    # The output section does not change the hash
    first = SETTINGS.merge_settings({"output": {"directory": "one", "workers": "4"}})
    second = SETTINGS.merge_settings({"output": {"directory": "two"}})
    assert UTILS.config_hash(SETTINGS.hashed_view(first)) == UTILS.config_hash(
        SETTINGS.hashed_view(second)
    )
    third = SETTINGS.merge_settings({"eval": {"seed": "1"}})
    assert UTILS.config_hash(SETTINGS.hashed_view(first)) != UTILS.config_hash(
        SETTINGS.hashed_view(third)
    )

    assert SETTINGS.flag_name("filters", "sto_scope") == "--filters-sto-scope"
    flags = list(SETTINGS.all_flags())
    assert ("solver", "max_iters", "--solver-max-iters") in flags
    assert len(flags) == sum(len(keys) for keys in CONST.SETTING_KEYS.values())
