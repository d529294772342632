"""An asynchronous toolkit for cell-type deconvolution of expression mixtures.

Estimates per-sample cell-type proportions from a mixture matrix and a
reference profile with a family of losses, constraint modes and
regularizers, together with gene filters, marker selection and evaluation
against known proportions.

Published under the MIT license - See LICENSE file for more details.
"""

from __future__ import annotations

import asyncio
import logging
import os
from collections.abc import Callable, Iterable, Mapping
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import partial
from typing import Any, TypeVar, cast

import numpy as np
import pandas as pd

from . import dataset as DATA
from . import settings as SETTINGS
from . import utils as UTILS
from .evaluation import (
    EvalResult,
    RandomBaseline,
    evaluate,
    measure_agreement,
    per_sample_qc,
)
from .exceptions import (
    DeconvDataException,
    DeconvException,
    DeconvUsageException,
)
from .filters import (
    FeatureMask,
    RangeBounds,
    ViolationReport,
    adaptive_range_bounds,
    fixed_range_mask,
    knee_indices,
    range_sweep,
    sorted_expression_curve,
    sto_violation_filter,
)
from .helpers import const as CONST
from .helpers import errors as ERROR
from .helpers.const import (
    Criterion,
    KneeNormalization,
    MarkerMethod,
    PValueCombine,
    RangeMode,
    ViolationDrop,
    ViolationScope,
)
from .helpers.models import RunManifest, SettingsData, StageCounts
from .markers import BasisCut, MarkerScore, optimal_cut, score_abbas, score_newman
from .model import (
    ConcentrationMatrix,
    ExpressionMatrix,
    PercentageMatrix,
    to_percentages,
    validate_alignment,
)
from .solver import (
    DeconvolutionConfig,
    GridCriterion,
    LossKind,
    deconvolve_sample,
    grid_search_param,
    loss_value,
)
from .synth import SynthDataset, SynthSpec, generate

_LOGGER = logging.getLogger(__name__)

_T = TypeVar("_T")


@dataclass(frozen=True)
class FilterOutcome:
    """Gene masks from the violation and range filters."""

    range_mask: FeatureMask
    sample_masks: dict[str, FeatureMask]
    violation: ViolationReport | None = None
    bounds: RangeBounds | None = None


@dataclass(frozen=True)
class MarkerOutcome:
    """Marker scores and the chosen basis cut."""

    scores: list[MarkerScore]
    cut: BasisCut
    mask: FeatureMask


@dataclass(frozen=True)
class SampleFit:
    """Coefficients of one sample under one configuration."""

    coefficients: np.ndarray
    residual_rmsd: float
    genes: int
    loss_param: float | None
    lam: float


@dataclass
class RunResult:
    """Tables produced by a grid run."""

    metrics: pd.DataFrame
    concentrations: pd.DataFrame
    per_sample: pd.DataFrame
    manifest: RunManifest
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)


def _fit_sample(
    design: np.ndarray,
    target: np.ndarray,
    config: DeconvolutionConfig,
    search_lambda: bool,
    search_loss: bool,
    criterion: GridCriterion,
) -> SampleFit:
    """Solve one sample, searching lambda first and then the loss parameter."""
    if search_lambda:
        result = grid_search_param(design, target, config, criterion, target="lambda")
        config = config.with_parameter("lambda", result.best)
    if search_loss:
        loss_criterion = criterion
        if criterion.kind is Criterion.LCURVE:
            loss_criterion = GridCriterion.residual_rmsd()
        result = grid_search_param(design, target, config, loss_criterion, target="loss")
        config = config.with_parameter("loss", result.best)
    solution = deconvolve_sample(design, target, config)
    return SampleFit(
        coefficients=np.array(solution.coefficients),
        residual_rmsd=solution.residual_rmsd,
        genes=design.shape[0],
        loss_param=config.loss.param,
        lam=config.regularizer.lam,
    )


def _mean_count(counts: Iterable[int]) -> int | float:
    """Return the shared count, or the mean when samples differ."""
    values = list(counts)
    if len(set(values)) == 1:
        return values[0]
    return float(np.mean(values))


def _chosen_values(values: Iterable[float]) -> str:
    """Distinct values in ascending order, comma separated."""
    return ",".join(format(value, "g") for value in sorted(set(values)))


class Deconvolution:  # pylint:disable=too-many-public-methods
    """Main deconvolution runner."""

    _close_executor = False

    def __init__(
        self,
        settings: Mapping[str, Mapping[str, Any]] | None = None,
        executor: Executor | None = None,
    ) -> None:
        """Initialize the runner from a settings tree (defaults for the rest)."""
        self._settings: SettingsData = SETTINGS.merge_settings(settings or {})
        workers = SETTINGS.as_int(self._settings, CONST.OUTPUT, "workers")
        if workers < 1:
            raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, f"output.workers={workers}")
        if executor is None:
            executor = ThreadPoolExecutor(max_workers=workers)
            self._close_executor = True
        self._executor = executor

    async def __aenter__(self) -> Deconvolution:
        """Async enter."""
        return self

    async def __aexit__(self, *exc_info: Any) -> None:
        """Async exit."""
        if self._executor and self._close_executor:
            self._executor.shutdown(wait=True)

    @property
    def settings(self) -> SettingsData:
        """Return the merged settings."""
        return self._settings

    @property
    def output_directory(self) -> str:
        """Return the output directory."""
        return self._settings[CONST.OUTPUT]["directory"]

    def _path(self, filename: str) -> str:
        os.makedirs(self.output_directory, exist_ok=True)
        return os.path.join(self.output_directory, filename)

    async def _async_call(self, func: Callable[..., _T], *args: Any, **kwargs: Any) -> _T:
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(self._executor, partial(func, *args, **kwargs))

    async def async_ingest(self) -> DATA.Dataset:
        """Read the configured dataset and align mixture and reference genes.

        Exceptions: DeconvUsageException, DeconvDataException.
        """
        paths = self._settings[CONST.DATASET]
        for key in ("mixture", "reference"):
            if not paths[key]:
                raise DeconvUsageException(ERROR.MISSING_INPUT, f"dataset.{key}")
        data = await DATA.async_ingest(
            paths["mixture"], paths["reference"], paths["replicates"], paths["truth"]
        )
        aligned = validate_alignment(data.mixture, data.reference)
        replicates = data.replicates
        if replicates is not None:
            replicates = replicates.select_rows(aligned.reference.row_labels)
        return DATA.Dataset(
            aligned.mixture, aligned.reference, replicates, data.grouping, data.truth
        )

    async def async_filter(self, data: DATA.Dataset) -> FilterOutcome:
        """Apply the violation filter and the range filter.

        Exceptions: DeconvUsageException, DeconvDataException.
        """
        settings = self._settings
        genes = data.mixture.shape[0]
        mode = SETTINGS.as_enum(settings, CONST.FILTERS, "range", RangeMode)
        bounds = None
        range_mask = FeatureMask.everything(genes)
        if mode is RangeMode.FIXED:
            bounds = RangeBounds(
                SETTINGS.as_float(settings, CONST.FILTERS, "range_lo"),
                SETTINGS.as_float(settings, CONST.FILTERS, "range_hi"),
            )
        elif mode is RangeMode.ADAPTIVE:
            normalization = SETTINGS.as_enum(
                settings, CONST.FILTERS, "range_normalization", KneeNormalization
            )
            bounds = adaptive_range_bounds(data.mixture, data.reference, normalization)
        if bounds is not None:
            range_mask = fixed_range_mask(data.mixture, data.reference, bounds)
            if range_mask.retained == 0:
                raise DeconvDataException(ERROR.EMPTY_BASIS, range_mask.provenance)

        violation = None
        sample_masks = {sample: range_mask for sample in data.mixture.col_labels}
        if SETTINGS.as_bool(settings, CONST.FILTERS, "sto_violation"):
            violation = sto_violation_filter(
                data.reference,
                data.mixture,
                SETTINGS.as_enum(settings, CONST.FILTERS, "sto_scope", ViolationScope),
                SETTINGS.as_enum(settings, CONST.FILTERS, "sto_categories", ViolationDrop),
            )
            sample_masks = {
                sample: violation.mask_for(sample) & range_mask
                for sample in data.mixture.col_labels
            }
        _LOGGER.info(
            "Filters kept %s of %s genes (range %s)", range_mask.retained, genes, mode.value
        )
        return FilterOutcome(range_mask, sample_masks, violation, bounds)

    async def async_markers(
        self, data: DATA.Dataset, range_mask: FeatureMask
    ) -> MarkerOutcome | None:
        """Score markers on the replicate table and cut the basis.

        Exceptions: DeconvUsageException, DeconvDataException.
        """
        settings = self._settings
        method = SETTINGS.as_enum(settings, CONST.MARKERS, "method", MarkerMethod)
        if method is MarkerMethod.NONE:
            return None
        if data.replicates is None or data.grouping is None:
            raise DeconvUsageException(ERROR.MISSING_INPUT, "dataset.replicates")
        replicates = data.replicates.restrict(range_mask.keep)
        reference = data.reference.restrict(range_mask.keep)
        combine = SETTINGS.as_enum(settings, CONST.MARKERS, "combine", PValueCombine)
        step_cap = SETTINGS.as_int(settings, CONST.MARKERS, "step_cap")
        if method is MarkerMethod.ABBAS:
            scores = await self._async_call(score_abbas, replicates, data.grouping, combine)
            cut = await self._async_call(optimal_cut, scores, reference, method, step_cap)
        else:
            q_cut = SETTINGS.marker_q_cut(settings)
            selection = await self._async_call(
                score_newman, replicates, data.grouping, q_cut, combine
            )
            scores = [score for genes in selection.markers.values() for score in genes]
            cut = await self._async_call(
                optimal_cut, selection.markers, reference, method, step_cap
            )
        chosen = set(cut.genes)
        labels = np.array(data.reference.row_labels, dtype=object)
        keep = range_mask.keep & np.isin(labels, list(chosen))
        _LOGGER.info("Marker cut kept %s genes (%s)", len(chosen), method.value)
        return MarkerOutcome(scores, cut, FeatureMask(keep, f"markers({method.value})"))

    def _truth_percentages(self, data: DATA.Dataset) -> PercentageMatrix | None:
        if data.truth is None:
            return None
        truth = data.truth
        if set(truth.celltype_labels) != set(data.reference.col_labels) or set(
            truth.sample_labels
        ) != set(data.mixture.col_labels):
            raise DeconvDataException(ERROR.SHAPE_MISMATCH, "truth labels differ from the data")
        truth = truth.select_celltypes(data.reference.col_labels).select_samples(
            data.mixture.col_labels
        )
        return to_percentages(truth)

    def _criterion_for(self, truth: PercentageMatrix | None, column: int) -> GridCriterion:
        kind = SETTINGS.as_enum(self._settings, CONST.SOLVER, "criterion", Criterion)
        if kind is Criterion.AUTO:
            kind = Criterion.ORACLE_MAD if truth is not None else Criterion.RESIDUAL_RMSD
        if kind is Criterion.ORACLE_MAD:
            if truth is None:
                raise DeconvUsageException(ERROR.MISSING_INPUT, "dataset.truth")
            return GridCriterion.oracle_mad(truth.values[:, column] / 100.0)
        if kind is Criterion.LCURVE:
            return GridCriterion.lcurve()
        return GridCriterion.residual_rmsd()

    async def _async_fit_all(
        self,
        data: DATA.Dataset,
        configs: list[DeconvolutionConfig],
        masks: Mapping[str, FeatureMask],
        truth: PercentageMatrix | None,
    ) -> list[list[SampleFit] | DeconvException]:
        param_search = SETTINGS.as_bool(self._settings, CONST.SOLVER, "param_search")
        lambda_grid = SETTINGS.lambda_is_grid(self._settings)
        tasks = []
        for config in configs:
            search_lambda = lambda_grid and config.regularizer.active
            search_loss = param_search and config.loss.has_param
            for column, sample in enumerate(data.mixture.col_labels):
                keep = masks[sample].keep
                tasks.append(
                    self._async_call(
                        _fit_sample,
                        data.reference.values[keep],
                        data.mixture.values[keep, column],
                        config,
                        search_lambda,
                        search_loss,
                        self._criterion_for(truth, column),
                    )
                )
        results = await asyncio.gather(*tasks, return_exceptions=True)
        samples = len(data.mixture.col_labels)
        grouped: list[list[SampleFit] | DeconvException] = []
        for index, config in enumerate(configs):
            block = results[index * samples : (index + 1) * samples]
            failure = next((item for item in block if isinstance(item, BaseException)), None)
            if failure is None:
                grouped.append(cast(list[SampleFit], block))
            elif isinstance(failure, DeconvException):
                _LOGGER.warning("Configuration %s failed: %s", config.label, failure)
                grouped.append(failure)
            else:
                raise failure
        return grouped

    async def async_run_grid(self) -> RunResult:
        """Run filters, markers, every configuration and the evaluation.

        Stage errors of one configuration are recorded in its metrics row and
        the grid moves on to the next one.
        Exceptions: DeconvUsageException, DeconvDataException.
        """
        started = datetime.now(timezone.utc).isoformat()
        data = await self.async_ingest()
        truth = self._truth_percentages(data)
        configs = SETTINGS.solver_configs(self._settings, data.reference.col_labels)
        filtered = await self.async_filter(data)
        markers = await self.async_markers(data, filtered.range_mask)
        basis = filtered.range_mask if markers is None else markers.mask
        if basis.retained == 0:
            raise DeconvDataException(ERROR.EMPTY_BASIS, basis.provenance)
        masks = {sample: mask & basis for sample, mask in filtered.sample_masks.items()}
        for sample, mask in masks.items():
            if mask.retained == 0:
                raise DeconvDataException(ERROR.EMPTY_BASIS, sample)

        fits = await self._async_fit_all(data, configs, masks, truth)
        baseline = None
        if truth is not None:
            baseline = await self._async_call(
                RandomBaseline.draw,
                truth,
                SETTINGS.as_int(self._settings, CONST.EVAL, "samples"),
                SETTINGS.as_int(self._settings, CONST.EVAL, "seed"),
            )
        genes_used = {sample: mask.retained for sample, mask in masks.items()}
        metrics, concentrations, per_sample = self._grid_tables(
            data, configs, fits, truth, baseline, genes_used
        )

        tables = {
            CONST.METRICS_FILE: metrics,
            CONST.CONCENTRATIONS_FILE: concentrations,
            CONST.PER_SAMPLE_FILE: per_sample,
            CONST.FILTER_REPORT_FILE: self._filter_report(data, filtered),
            CONST.LOSS_CURVE_FILE: self.loss_curve(),
        }
        curve = self._sorted_expression(data)
        if curve is not None:
            tables[CONST.SORTED_EXPRESSION_FILE] = curve
        if markers is not None:
            tables[CONST.CONDITION_CURVE_FILE] = self._condition_curve(markers.cut)
        if truth is not None:
            scored = metrics[metrics["error"] == ""]
            tables[CONST.AGREEMENT_FILE] = measure_agreement(scored)
        for filename, frame in tables.items():
            await DATA.async_write_frame(self._path(filename), frame)

        after_violation = data.mixture.shape[0]
        if filtered.violation is not None:
            after_violation = min(mask.retained for mask in filtered.violation.masks.values())
        counts = StageCounts(
            aligned=data.mixture.shape[0],
            after_violation=after_violation,
            after_range=filtered.range_mask.retained,
            after_markers=basis.retained,
        )
        manifest = await self.async_write_manifest(started, counts)
        return RunResult(metrics, concentrations, per_sample, manifest, tables)

    def _grid_tables(
        self,
        data: DATA.Dataset,
        configs: list[DeconvolutionConfig],
        fits: list[list[SampleFit] | DeconvException],
        truth: PercentageMatrix | None,
        baseline: RandomBaseline | None,
        genes_used: Mapping[str, int],
    ) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
        celltypes = data.reference.col_labels
        samples = data.mixture.col_labels
        lam_text = self._settings[CONST.SOLVER]["lambda"]
        threshold = SETTINGS.as_float(self._settings, CONST.EVAL, "qc_threshold")
        metric_rows = []
        conc_blocks = []
        sample_rows = []
        for index, (config, fit) in enumerate(zip(configs, fits), start=1):
            row: dict[str, Any] = {
                CONST.CONFIG_ID: index,
                "loss": config.loss.name.value,
                "nn": config.constraints.nn.value,
                "sto": config.constraints.sto.value,
                "regularizer": str(config.regularizer),
                "lambda": lam_text,
                "mad": None,
                "rmsd": None,
                "r2d": None,
                "p_mad": None,
                "p_rmsd": None,
                "p_r2d": None,
                "n_genes_used": _mean_count(genes_used.values()),
                "error": "",
            }
            if isinstance(fit, DeconvException):
                row["error"] = str(fit)
                metric_rows.append(row)
                continue
            row["lambda"] = _chosen_values(item.lam for item in fit)
            estimate = ConcentrationMatrix.from_columns(
                celltypes, {s: f.coefficients for s, f in zip(samples, fit)}
            )
            block = estimate.to_frame().reset_index()
            block.insert(0, CONST.CONFIG_ID, index)
            conc_blocks.append(block)
            sample_mad: list[float | None] = [None] * len(samples)
            flags = [False] * len(samples)
            if truth is not None:
                percentages = to_percentages(estimate)
                row.update(evaluate(truth, percentages, baseline).as_dict())
                quality = per_sample_qc(truth, percentages, threshold)
                sample_mad = [float(v) for v in quality.mad]
                flags = [bool(v) for v in quality.flags]
            metric_rows.append(row)
            for position, (sample, item) in enumerate(zip(samples, fit)):
                sample_rows.append(
                    {
                        CONST.CONFIG_ID: index,
                        CONST.SAMPLE: sample,
                        "mad": sample_mad[position],
                        "qc_flag": int(flags[position]),
                        "loss_param": item.loss_param,
                        "lambda": item.lam,
                        "n_genes": item.genes,
                        "residual_rmsd": item.residual_rmsd,
                    }
                )
        metrics = pd.DataFrame(metric_rows, columns=CONST.METRICS_COLUMNS)
        concentrations = (
            pd.concat(conc_blocks, ignore_index=True)
            if conc_blocks
            else pd.DataFrame(columns=[CONST.CONFIG_ID, CONST.CELLTYPE, *samples])
        )
        per_sample = pd.DataFrame(
            sample_rows,
            columns=[
                CONST.CONFIG_ID,
                CONST.SAMPLE,
                "mad",
                "qc_flag",
                "loss_param",
                "lambda",
                "n_genes",
                "residual_rmsd",
            ],
        )
        return metrics, concentrations, per_sample

    def _filter_report(self, data: DATA.Dataset, filtered: FilterOutcome) -> pd.DataFrame:
        rows = []
        for sample in data.mixture.col_labels:
            row: dict[str, Any] = {
                CONST.SAMPLE: sample,
                "genes": data.mixture.shape[0],
                "violating_reference": None,
                "violating_mixture": None,
                "after_violation": None,
                "after_range": filtered.range_mask.retained,
                "retained": filtered.sample_masks[sample].retained,
                "range_lo": filtered.bounds.lo if filtered.bounds else None,
                "range_hi": filtered.bounds.hi if filtered.bounds else None,
            }
            if filtered.violation is not None:
                labels = filtered.violation.categories[sample]
                row["violating_reference"] = int((labels == "violating_reference").sum())
                row["violating_mixture"] = int((labels == "violating_mixture").sum())
                row["after_violation"] = filtered.violation.mask_for(sample).retained
            rows.append(row)
        return pd.DataFrame(rows)

    def _sorted_expression(self, data: DATA.Dataset) -> pd.DataFrame | None:
        curve = sorted_expression_curve(data.mixture, data.reference)
        if curve.values.shape[0] < CONST.MIN_KNEE_POINTS:
            return None
        normalization = SETTINGS.as_enum(
            self._settings, CONST.FILTERS, "range_normalization", KneeNormalization
        )
        lo_index, hi_index, _, _ = knee_indices(curve.values, normalization)
        knee = [""] * curve.values.shape[0]
        knee[lo_index] = "lo"
        knee[hi_index] = "hi"
        return pd.DataFrame(
            {
                "rank": np.arange(1, curve.values.shape[0] + 1),
                CONST.GENE: list(curve.genes),
                "log2_max": curve.values,
                "knee": knee,
            }
        )

    @staticmethod
    def _condition_curve(cut: BasisCut) -> pd.DataFrame:
        sizes = np.cumsum([len(step) for step in cut.steps])
        return pd.DataFrame(
            {
                "step": np.arange(1, len(cut.steps) + 1),
                "genes_added": [",".join(step) for step in cut.steps],
                "n_genes": sizes,
                "condition": list(cut.curve),
                "chosen": [int(i == cut.chosen) for i in range(len(cut.steps))],
            }
        )

    def loss_curve(self) -> pd.DataFrame:
        """Loss values over a residual grid, one column per loss."""
        steps = int(round(2 * CONST.LOSS_CURVE_LIMIT / CONST.LOSS_CURVE_STEP))
        residuals = np.round(
            np.linspace(-CONST.LOSS_CURVE_LIMIT, CONST.LOSS_CURVE_LIMIT, steps + 1), 10
        )
        kinds = {
            "l2": LossKind.squared_l2(),
            "l1": LossKind.absolute_l1(),
            "huber": LossKind.huber(SETTINGS.as_float(self._settings, CONST.SOLVER, "huber_m")),
            "eps": LossKind.eps_insensitive(
                SETTINGS.as_float(self._settings, CONST.SOLVER, "epsilon")
            ),
        }
        frame = pd.DataFrame({"r": residuals})
        for name, kind in kinds.items():
            frame[name] = loss_value(kind, residuals)
        return frame

    async def async_write_manifest(self, started: str, counts: StageCounts) -> RunManifest:
        """Write manifest.txt and return it."""
        manifest = RunManifest(
            config_hash=UTILS.config_hash(SETTINGS.hashed_view(self._settings)),
            tool_version=CONST.TOOL_VERSION,
            seed=SETTINGS.as_int(self._settings, CONST.EVAL, "seed"),
            started=started,
            finished=datetime.now(timezone.utc).isoformat(),
            stage_counts=counts,
        )
        lines = [
            f"config_hash\t{manifest['config_hash']}",
            f"tool_version\t{manifest['tool_version']}",
            f"seed\t{manifest['seed']}",
            f"started\t{manifest['started']}",
            f"finished\t{manifest['finished']}",
        ]
        lines.extend(f"genes_{stage}\t{count}" for stage, count in counts.items())
        await UTILS.async_write_text(self._path(CONST.MANIFEST_FILE), "\n".join(lines) + "\n")
        return manifest

    async def async_filter_report(self) -> FilterOutcome:
        """Run the filters alone and write masks and reports.

        Exceptions: DeconvUsageException, DeconvDataException.
        """
        data = await self.async_ingest()
        filtered = await self.async_filter(data)
        masks = pd.DataFrame(
            {"range": filtered.range_mask.keep.astype(int)},
            index=pd.Index(data.mixture.row_labels, name=CONST.GENE),
        )
        for sample, mask in filtered.sample_masks.items():
            masks[sample] = mask.keep.astype(int)
        await DATA.async_write_frame(self._path(CONST.MASKS_FILE), masks, index=True)
        await DATA.async_write_frame(
            self._path(CONST.FILTER_REPORT_FILE), self._filter_report(data, filtered)
        )
        curve = self._sorted_expression(data)
        if curve is not None:
            await DATA.async_write_frame(self._path(CONST.SORTED_EXPRESSION_FILE), curve)
        lo = SETTINGS.as_float(self._settings, CONST.FILTERS, "range_lo")
        await DATA.async_write_frame(
            self._path(CONST.RANGE_SWEEP_FILE), range_sweep(data.mixture, data.reference, lo)
        )
        return filtered

    async def async_marker_report(self) -> MarkerOutcome:
        """Score markers, cut the basis and write both.

        Exceptions: DeconvUsageException, DeconvDataException.
        """
        data = await self.async_ingest()
        filtered = await self.async_filter(data)
        markers = await self.async_markers(data, filtered.range_mask)
        if markers is None:
            raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, "markers.method=none")
        scores = pd.DataFrame(
            [
                {
                    CONST.GENE: score.gene,
                    CONST.CELLTYPE: score.celltype,
                    "p_value": score.p_value,
                    "q_value": score.q_value,
                    "fold_ratio": score.fold_ratio,
                    "selected": int(score.gene in set(markers.cut.genes)),
                }
                for score in markers.scores
            ],
            columns=[CONST.GENE, CONST.CELLTYPE, "p_value", "q_value", "fold_ratio", "selected"],
        )
        await DATA.async_write_frame(self._path(CONST.MARKER_SCORES_FILE), scores)
        await DATA.async_write_frame(
            self._path(CONST.CONDITION_CURVE_FILE), self._condition_curve(markers.cut)
        )
        return markers

    async def async_evaluate(
        self, truth: str, estimate: str, config_id: str | None = None
    ) -> EvalResult:
        """Score an estimate file against a truth file and write eval.tsv.

        Exceptions: DeconvDataException.
        """
        truth_matrix = await DATA.async_read_concentrations(truth)
        estimate_matrix = await DATA.async_read_concentrations(estimate, config_id)
        truth_pct = to_percentages(truth_matrix)
        estimate_pct = to_percentages(estimate_matrix)
        baseline = await self._async_call(
            RandomBaseline.draw,
            truth_pct,
            SETTINGS.as_int(self._settings, CONST.EVAL, "samples"),
            SETTINGS.as_int(self._settings, CONST.EVAL, "seed"),
        )
        result = evaluate(truth_pct, estimate_pct, baseline)
        await DATA.async_write_frame(
            self._path(CONST.EVAL_FILE), pd.DataFrame([result.as_dict()])
        )
        return result

    async def async_synth(self, spec: SynthSpec, seed: int = 0) -> SynthDataset:
        """Generate a dataset and write it as TSV inputs."""
        generated = await self._async_call(generate, spec, seed)
        await DATA.async_write_expression(self._path(CONST.MIXTURE_FILE), generated.mixture)
        if generated.replicates is not None and generated.grouping is not None:
            await DATA.async_write_expression(
                self._path(CONST.REPLICATES_FILE), generated.replicates
            )
            await DATA.async_write_replicate_map(
                self._path(CONST.REPLICATE_MAP_FILE), generated.grouping
            )
        await DATA.async_write_expression(
            self._path(CONST.REFERENCE_FILE), generated.reference_given
        )
        await DATA.async_write_concentrations(
            self._path(CONST.TRUTH_FILE), generated.concentrations
        )
        return generated

    async def async_loss_curve(self) -> pd.DataFrame:
        """Write loss_curve.tsv."""
        frame = self.loss_curve()
        await DATA.async_write_frame(self._path(CONST.LOSS_CURVE_FILE), frame)
        return frame


__all__ = ["Deconvolution", "ExpressionMatrix"]
