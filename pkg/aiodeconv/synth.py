"""Synthetic datasets and seeded trial batteries."""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import Executor
from dataclasses import dataclass, field
import logging

import numpy as np
import pandas as pd

from .evaluation import METRICS, evaluate
from .exceptions import DeconvUsageException
from .filters import sto_violation_filter
from .helpers import const as CONST
from .helpers import errors as ERROR
from .helpers.const import NoiseKind, ScqGenes, ViolationScope
from .model import (
    ConcentrationMatrix,
    ExpressionMatrix,
    ReplicateGrouping,
    to_percentages,
)
from .solver import DeconvolutionConfig, deconvolve_matrix

_LOGGER = logging.getLogger(__name__)

_STREAMS = ("reference", "concentrations", "noise", "perturbation", "replicates")


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise on the mixtures.

    level is the gaussian sigma or the laplacian scale. The outlier kind adds
    gaussian(level) everywhere and, on a fraction of the entries, gaussian
    noise whose sigma is level * scale instead.
    """

    kind: NoiseKind = NoiseKind.NONE
    level: float = 0.0
    fraction: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        """Validate the parameters of the chosen kind."""
        kind = NoiseKind(self.kind)
        if kind is not NoiseKind.NONE and not self.level > 0:
            raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("noise level", self.level))
        if kind is NoiseKind.OUTLIER and not (0 <= self.fraction <= 1 and self.scale > 0):
            raise DeconvUsageException(
                ERROR.INVALID_SETTING_VALUE, ("outliers", self.fraction, self.scale)
            )
        object.__setattr__(self, "kind", kind)

    def sample(self, rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
        """Draw a noise matrix."""
        if self.kind is NoiseKind.NONE:
            return np.zeros(shape)
        if self.kind is NoiseKind.LAPLACIAN:
            return rng.laplace(0.0, self.level, size=shape)
        noise = rng.normal(0.0, self.level, size=shape)
        if self.kind is NoiseKind.OUTLIER:
            hit = rng.uniform(size=shape) < self.fraction
            wide = rng.normal(0.0, self.level * self.scale, size=shape)
            noise = np.where(hit, wide, noise)
        return noise


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic dataset.

    concentrations is None for iid uniform simplex columns, or a fixed
    (cell-types + hidden types) x samples design. scq_scale multiplies the
    mixture on every gene, or with scq_genes SHARED only on the non-marker
    genes, where mixture and reference normalizations disagree.
    """

    n_genes: int = 500
    n_types: int = 4
    n_samples: int = 10
    markers_per_type: int = 25
    expression_range: tuple[float, float] = CONST.EXPRESSION_LOG2_RANGE
    concentrations: np.ndarray | None = None
    noise: NoiseModel = field(default_factory=NoiseModel)
    scq_scale: float = 1.0
    scq_genes: ScqGenes = ScqGenes.ALL
    reference_perturbation_sigma: float = 0.0
    replicates_per_type: int = 0
    replicate_sigma: float = 0.1
    hidden_types: int = 0

    def __post_init__(self) -> None:
        """Check the recipe is buildable."""
        total = self.n_types + self.hidden_types
        if self.n_types < 1 or self.n_samples < 1 or self.markers_per_type < 0:
            raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, "sizes")
        if self.n_genes < total * self.markers_per_type:
            raise DeconvUsageException(
                ERROR.INVALID_SETTING_VALUE, ("n_genes", self.n_genes, total * self.markers_per_type)
            )
        if not self.scq_scale > 0 or self.reference_perturbation_sigma < 0:
            raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, "scq or perturbation")
        low, high = self.expression_range
        if not low < high:
            raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("range", low, high))
        if self.concentrations is not None:
            design = np.asarray(self.concentrations, dtype=float)
            if (
                design.shape != (total, self.n_samples)
                or np.any(design < 0)
                or np.any(np.abs(design.sum(axis=0) - 1.0) > CONST.STO_TOL)
            ):
                raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, "concentration design")
        object.__setattr__(self, "scq_genes", ScqGenes(self.scq_genes))


@dataclass(frozen=True)
class SynthDataset:
    """Generated matrices.

    reference_true spans hidden types too; reference_given and
    concentrations cover the visible types only.
    """

    reference_true: ExpressionMatrix
    reference_given: ExpressionMatrix
    concentrations: ConcentrationMatrix
    mixture: ExpressionMatrix
    clamp_rate: float
    replicates: ExpressionMatrix | None = None
    grouping: ReplicateGrouping | None = None


def _labels(prefix: str, count: int) -> tuple[str, ...]:
    width = len(str(count))
    return tuple(f"{prefix}{index:0{width}d}" for index in range(1, count + 1))


def _reference(spec: SynthSpec, rng: np.random.Generator, total: int) -> np.ndarray:
    low, high = spec.expression_range
    values = np.empty((spec.n_genes, total))
    markers = total * spec.markers_per_type
    for celltype in range(total):
        rows = slice(celltype * spec.markers_per_type, (celltype + 1) * spec.markers_per_type)
        level = 2.0 ** rng.uniform(low, high, size=spec.markers_per_type)
        values[rows] = CONST.LEAKAGE * level[:, None]
        values[rows, celltype] = level
    background = spec.n_genes - markers
    common = 2.0 ** rng.uniform(low, high, size=background)
    jitter = rng.uniform(
        1.0 - CONST.BACKGROUND_JITTER, 1.0 + CONST.BACKGROUND_JITTER, size=(background, total)
    )
    values[markers:] = common[:, None] * jitter
    return values


def generate(spec: SynthSpec, seed: int | np.random.SeedSequence = 0) -> SynthDataset:
    """Build G, C and M = scq * G C + noise, clamped at zero."""
    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rngs = dict(zip(_STREAMS, (np.random.default_rng(s) for s in sequence.spawn(len(_STREAMS)))))
    total = spec.n_types + spec.hidden_types
    genes = _labels("g", spec.n_genes)
    visible = _labels("type", spec.n_types)
    celltypes = visible + _labels("hidden", spec.hidden_types)
    samples = _labels("s", spec.n_samples)

    reference = _reference(spec, rngs["reference"], total)
    if spec.concentrations is None:
        draws = rngs["concentrations"].uniform(0.0, 1.0, size=(total, spec.n_samples))
        concentrations = draws / draws.sum(axis=0)
    else:
        concentrations = np.array(spec.concentrations, dtype=float)

    scale = np.full((spec.n_genes, 1), spec.scq_scale)
    if spec.scq_genes is ScqGenes.SHARED:
        scale[: total * spec.markers_per_type] = 1.0
    mixture = scale * (reference @ concentrations)
    mixture = mixture + spec.noise.sample(rngs["noise"], mixture.shape)
    negative = mixture < 0
    clamp_rate = float(negative.mean())
    if clamp_rate > 0:
        _LOGGER.warning("Clamped %.3f%% of mixture values at zero", 100.0 * clamp_rate)
        mixture = np.where(negative, 0.0, mixture)

    given = reference[:, : spec.n_types]
    if spec.reference_perturbation_sigma > 0:
        given = given * rngs["perturbation"].lognormal(
            0.0, spec.reference_perturbation_sigma, size=given.shape
        )
    visible_conc = concentrations[: spec.n_types]
    visible_conc = visible_conc / visible_conc.sum(axis=0)

    replicates = grouping = None
    if spec.replicates_per_type > 0:
        columns: dict[str, str] = {}
        blocks = []
        for index, celltype in enumerate(visible):
            for replicate in range(1, spec.replicates_per_type + 1):
                columns[f"{celltype}_r{replicate}"] = celltype
            blocks.append(
                given[:, [index]]
                * rngs["replicates"].lognormal(
                    0.0, spec.replicate_sigma, size=(spec.n_genes, spec.replicates_per_type)
                )
            )
        replicates = ExpressionMatrix(genes, tuple(columns), np.hstack(blocks))
        grouping = ReplicateGrouping(columns, visible)

    return SynthDataset(
        reference_true=ExpressionMatrix(genes, celltypes, reference),
        reference_given=ExpressionMatrix(genes, visible, given),
        concentrations=ConcentrationMatrix(visible, samples, visible_conc),
        mixture=ExpressionMatrix(genes, samples, mixture),
        clamp_rate=clamp_rate,
        replicates=replicates,
        grouping=grouping,
    )


def _run_trial(
    spec: SynthSpec,
    sequence: np.random.SeedSequence,
    configs: Sequence[DeconvolutionConfig],
    sto_filter: ViolationScope | None,
) -> np.ndarray:
    dataset = generate(spec, sequence)
    masks = None
    if sto_filter is not None:
        report = sto_violation_filter(dataset.reference_given, dataset.mixture, sto_filter)
        masks = {sample: mask.keep for sample, mask in report.masks.items()}
    truth = to_percentages(dataset.concentrations)
    scores = np.empty((len(configs), len(METRICS)))
    for index, config in enumerate(configs):
        estimate = deconvolve_matrix(dataset.reference_given, dataset.mixture, config, masks)
        result = evaluate(truth, to_percentages(estimate))
        scores[index] = [result.mad, result.rmsd, result.r2d]
    return scores


def trial_battery(
    spec: SynthSpec,
    trials: int,
    configs: Sequence[DeconvolutionConfig],
    seed: int = 0,
    sto_filter: ViolationScope | None = None,
    executor: Executor | None = None,
) -> pd.DataFrame:
    """Mean and standard deviation of every metric per configuration.

    Trial k always uses the k-th child of the seed, so results do not depend
    on the executor.
    """
    if trials < 1:
        raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("trials", trials))
    sequences = np.random.SeedSequence(seed).spawn(trials)
    args = ([spec] * trials, sequences, [configs] * trials, [sto_filter] * trials)
    if executor is None:
        results = list(map(_run_trial, *args))
    else:
        results = list(executor.map(_run_trial, *args))
    scores = np.stack(results)

    rows = []
    for index, config in enumerate(configs):
        row: dict[str, object] = {
            CONST.CONFIG_ID: index,
            "loss": str(config.loss),
            "nn": config.constraints.nn.value,
            "sto": config.constraints.sto.value,
            "regularizer": str(config.regularizer),
        }
        for position, metric in enumerate(METRICS):
            values = scores[:, index, position]
            row[f"{metric}_mean"] = float(np.mean(values))
            row[f"{metric}_std"] = float(np.std(values, ddof=1)) if trials > 1 else 0.0
        rows.append(row)
    return pd.DataFrame(rows)
