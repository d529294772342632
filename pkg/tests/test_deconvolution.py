# pylint:disable=protected-access, too-many-statements
"""
Test the deconvolution runner.

Runs the full pipeline on the small fixture dataset, whose mixtures are
exact combinations of the reference.
"""

from concurrent.futures import ThreadPoolExecutor
import os

import numpy as np
import pandas as pd
import pytest
from freezegun.api import FrozenDateTimeFactory

from aiodeconv import Deconvolution, exceptions
from aiodeconv.helpers import const as CONST
from tests import (
    REPLICATE_MAP,
    REPLICATES,
    TRUE_CONCENTRATIONS,
    fixture_path,
)


def read_table(directory, filename) -> pd.DataFrame:
    """Read a written result table."""
    return pd.read_csv(os.path.join(directory, filename), sep="\t", keep_default_na=False)


@pytest.mark.asyncio
async def test_loop() -> None:
    """Test the executor is owned only when created by the runner."""
    async with Deconvolution() as runner:
        assert isinstance(runner, Deconvolution)
        assert runner.output_directory == "results"
        assert runner._close_executor
    assert runner._executor._shutdown

    executor = ThreadPoolExecutor(max_workers=1)
    async with Deconvolution(executor=executor) as runner:
        assert not runner._close_executor
    assert not executor._shutdown
    executor.shutdown()

    with pytest.raises(exceptions.DeconvUsageException):
        Deconvolution({"output": {"workers": "0"}})
    with pytest.raises(exceptions.DeconvUsageException):
        Deconvolution({"solver": {"solvers": "l2"}})


@pytest.mark.asyncio
async def test_async_run_grid(
    runner: Deconvolution, settings: dict, freezer: FrozenDateTimeFactory
) -> None:
    """Test every configuration on exact data."""
    freezer.move_to("2026-03-30 13:33:00+00:00")
    result = await runner.async_run_grid()
    directory = settings["output"]["directory"]

    # Test the metrics
    metrics = result.metrics
    assert list(metrics.columns) == CONST.METRICS_COLUMNS
    assert metrics[CONST.CONFIG_ID].tolist() == list(range(1, 17))
    assert (metrics["error"] == "").all()
    assert (metrics["n_genes_used"] == 4).all()
    assert (metrics["lambda"] == "0").all()
    exact = metrics[metrics["loss"].isin(["l2", "l1", "huber"])]
    assert len(exact) == 12
    assert (exact["mad"] < 1e-3).all()
    assert exact["p_mad"].tolist() == pytest.approx([1.0 / 200] * 12)

    # Test the concentrations
    concentrations = result.concentrations
    assert list(concentrations.columns) == [CONST.CONFIG_ID, CONST.CELLTYPE, "s1", "s2"]
    first = concentrations[concentrations[CONST.CONFIG_ID] == 1]
    assert first[["s1", "s2"]].to_numpy() == pytest.approx(
        np.array(TRUE_CONCENTRATIONS), abs=1e-9
    )
    for _, block in concentrations.groupby(CONST.CONFIG_ID):
        assert block[["s1", "s2"]].sum().to_numpy() == pytest.approx([1.0, 1.0])
        assert (block[["s1", "s2"]].to_numpy() >= -1e-9).all()

    # Test the per-sample table
    per_sample = result.per_sample
    assert len(per_sample) == 32
    assert (per_sample["qc_flag"] == 0).all()
    assert (per_sample["n_genes"] == 4).all()

    # Test the written files
    for filename in (
        CONST.METRICS_FILE,
        CONST.CONCENTRATIONS_FILE,
        CONST.PER_SAMPLE_FILE,
        CONST.FILTER_REPORT_FILE,
        CONST.LOSS_CURVE_FILE,
        CONST.SORTED_EXPRESSION_FILE,
        CONST.AGREEMENT_FILE,
        CONST.MANIFEST_FILE,
    ):
        assert os.path.exists(os.path.join(directory, filename))
    written = read_table(directory, CONST.METRICS_FILE)
    assert len(written) == 16
    agreement = read_table(directory, CONST.AGREEMENT_FILE)
    assert agreement["measure_a"].tolist() == ["mad", "mad", "rmsd"]

    # Test the manifest
    manifest = result.manifest
    assert manifest["started"] == "2026-03-30T13:33:00+00:00"
    assert manifest["tool_version"] == CONST.TOOL_VERSION
    assert manifest["stage_counts"]["aligned"] == 4
    with open(os.path.join(directory, CONST.MANIFEST_FILE), encoding="utf8") as file:
        lines = file.read().splitlines()
    assert lines[0] == f"config_hash\t{manifest['config_hash']}"
    assert "genes_after_markers\t4" in lines


@pytest.mark.asyncio
async def test_async_run_grid_repeatable(settings: dict, tmp_path) -> None:
    """Test two runs with different worker counts write the same tables."""
    settings["solver"].update({"losses": "l2,l1"})
    outputs = []
    for workers in ("1", "2"):
        directory = str(tmp_path / f"workers{workers}")
        settings["output"] = {"directory": directory, "workers": workers}
        async with Deconvolution(settings) as runner:
            result = await runner.async_run_grid()
        outputs.append((directory, result.manifest))

    (first, first_manifest), (second, second_manifest) = outputs
    for filename in (CONST.METRICS_FILE, CONST.CONCENTRATIONS_FILE, CONST.PER_SAMPLE_FILE):
        with open(os.path.join(first, filename), "rb") as left, open(
            os.path.join(second, filename), "rb"
        ) as right:
            assert left.read() == right.read()
    assert first_manifest["config_hash"] == second_manifest["config_hash"]


@pytest.mark.asyncio
async def test_async_run_grid_without_truth(settings: dict, tmp_path) -> None:
    """Test a run with nothing to score against."""
    settings["dataset"]["truth"] = ""
    settings["solver"].update({"losses": "huber", "param_search": "on"})
    async with Deconvolution(settings) as runner:
        result = await runner.async_run_grid()
    assert result.metrics["mad"].isna().all()
    assert (result.metrics["error"] == "").all()
    assert not os.path.exists(os.path.join(settings["output"]["directory"], CONST.AGREEMENT_FILE))
    # The searched parameter is recorded per sample
    assert result.per_sample["loss_param"].notna().all()

    # Oracle criterion needs truth
    settings["solver"]["criterion"] = "oracle_mad"
    async with Deconvolution(settings) as runner:
        with pytest.raises(exceptions.DeconvUsageException):
            await runner.async_run_grid()


@pytest.mark.asyncio
async def test_async_run_grid_failures(settings: dict, tmp_path) -> None:
    """Test failed configurations are recorded and the rest still run."""
    mixture = tmp_path / "zeros.tsv"
    mixture.write_text("gene\ts1\ng1\t0\ng2\t0\ng3\t0\ng4\t0\n", encoding="utf8")
    settings["dataset"].update({"mixture": str(mixture), "truth": ""})
    settings["solver"]["losses"] = "l2"
    async with Deconvolution(settings) as runner:
        result = await runner.async_run_grid()
    errors = dict(zip(zip(result.metrics["nn"], result.metrics["sto"]), result.metrics["error"]))
    assert "Degenerate" in errors[("implicit", "implicit")]
    assert "Degenerate" in errors[("explicit", "implicit")]
    assert errors[("explicit", "explicit")] == ""
    assert set(result.concentrations[CONST.CONFIG_ID]) >= {4}

    # Missing inputs
    settings["dataset"]["mixture"] = ""
    async with Deconvolution(settings) as runner:
        with pytest.raises(exceptions.DeconvUsageException):
            await runner.async_run_grid()
    settings["dataset"]["mixture"] = fixture_path("duplicate_gene.tsv")
    async with Deconvolution(settings) as runner:
        with pytest.raises(exceptions.DeconvDataException):
            await runner.async_run_grid()


@pytest.mark.asyncio
async def test_async_run_grid_chosen_values(settings: dict) -> None:
    """Test the metrics row reports the searched lambda and per-sample genes."""
    settings["filters"] = {"sto_violation": "on"}
    settings["solver"].update(
        {
            "losses": "l2",
            "nn_modes": "explicit",
            "sto_modes": "explicit",
            "regularizer": "l2",
            "lambda": "grid",
            "criterion": "residual_rmsd",
        }
    )
    async with Deconvolution(settings) as runner:
        result = await runner.async_run_grid()

    (row,) = result.metrics.to_dict("records")
    assert row["error"] == ""
    chosen = sorted(set(result.per_sample["lambda"]))
    assert row["lambda"] == ",".join(format(value, "g") for value in chosen)
    assert row["lambda"] != "grid"
    # g3 is dropped in both samples by the violation filter
    assert result.per_sample["n_genes"].tolist() == [3, 3]
    assert row["n_genes_used"] == 3


@pytest.mark.asyncio
async def test_async_filter_report(settings: dict) -> None:
    """Test the violation and range filters on the fixture data."""
    settings["filters"] = {
        "sto_violation": "on",
        "range": "fixed",
        "range_lo": "0",
        "range_hi": "4",
    }
    async with Deconvolution(settings) as runner:
        filtered = await runner.async_filter_report()
    assert filtered.range_mask.retained == 4
    assert filtered.bounds.hi == 4.0
    for sample in ("s1", "s2"):
        # g3 sits at the reference minimum
        assert filtered.sample_masks[sample].keep.tolist() == [True, True, False, True]

    directory = settings["output"]["directory"]
    masks = read_table(directory, CONST.MASKS_FILE)
    assert masks.columns.tolist() == [CONST.GENE, "range", "s1", "s2"]
    assert masks["s1"].tolist() == [1, 1, 0, 1]
    report = read_table(directory, CONST.FILTER_REPORT_FILE)
    assert report["violating_reference"].tolist() == [1, 1]
    assert report["retained"].tolist() == [3, 3]
    sweep = read_table(directory, CONST.RANGE_SWEEP_FILE)
    assert sweep["percent"].iloc[-1] == 100.0

    # An upper bound below every value empties the basis
    settings["filters"].update({"range_lo": "5", "range_hi": "6"})
    async with Deconvolution(settings) as runner:
        with pytest.raises(exceptions.DeconvDataException):
            await runner.async_filter_report()


@pytest.mark.asyncio
async def test_async_marker_report(settings: dict) -> None:
    """Test marker scoring on the replicate fixture."""
    settings["dataset"].update(
        {"reference": fixture_path(REPLICATES), "replicates": fixture_path(REPLICATE_MAP)}
    )
    settings["markers"] = {"method": "abbas"}
    async with Deconvolution(settings) as runner:
        markers = await runner.async_marker_report()
    assert len(markers.scores) == 4
    assert markers.scores[-1].gene == "g3"
    assert markers.cut.chosen >= 1
    assert markers.mask.retained == len(markers.cut.genes)

    directory = settings["output"]["directory"]
    scores = read_table(directory, CONST.MARKER_SCORES_FILE)
    assert scores["selected"].sum() == len(markers.cut.genes)
    curve = read_table(directory, CONST.CONDITION_CURVE_FILE)
    assert curve["chosen"].sum() == 1
    assert curve["n_genes"].tolist() == [1, 2, 3, 4]

    # The grid runs on the marker basis
    settings["solver"]["losses"] = "l2"
    async with Deconvolution(settings) as runner:
        result = await runner.async_run_grid()
    assert (result.metrics["n_genes_used"] == len(markers.cut.genes)).all()

    # Markers without replicates
    settings["dataset"].update({"reference": fixture_path("reference.tsv"), "replicates": ""})
    async with Deconvolution(settings) as runner:
        with pytest.raises(exceptions.DeconvUsageException):
            await runner.async_marker_report()


@pytest.mark.asyncio
async def test_async_evaluate(runner: Deconvolution, settings: dict) -> None:
    """Test scoring a truth file against itself."""
    truth = settings["dataset"]["truth"]
    result = await runner.async_evaluate(truth, truth)
    assert result.mad == 0.0
    assert result.p_mad == pytest.approx(1.0 / 200)
    written = read_table(settings["output"]["directory"], CONST.EVAL_FILE)
    assert written["mad"].tolist() == [0.0]


@pytest.mark.asyncio
async def test_async_loss_curve(runner: Deconvolution) -> None:
    """Test the loss curve samples."""
    frame = await runner.async_loss_curve()
    assert frame.columns.tolist() == ["r", "l2", "l1", "huber", "eps"]
    assert len(frame) == 121
    last = frame.iloc[-1]
    assert last["r"] == 3.0
    assert (last["l2"], last["l1"], last["huber"], last["eps"]) == pytest.approx(
        (9.0, 3.0, 5.0, 2.5)
    )
    middle = frame.iloc[60]
    assert middle["r"] == 0.0
    assert middle[["l2", "l1", "huber", "eps"]].tolist() == [0.0, 0.0, 0.0, 0.0]
