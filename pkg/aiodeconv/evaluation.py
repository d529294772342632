"""Estimation error metrics, random baseline and agreement statistics."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from itertools import combinations, islice, permutations
import logging
import math

import numpy as np
import pandas as pd
from scipy import stats

from .exceptions import DeconvDataException, DeconvUndefinedCorrelationException
from .helpers import const as CONST
from .helpers import errors as ERROR
from .model import PercentageMatrix

_LOGGER = logging.getLogger(__name__)

METRICS = ("mad", "rmsd", "r2d")
CONFIG_KEYS = ["loss", "nn", "sto", "regularizer"]

_PERMUTATION_CHUNK = 100000


@dataclass(frozen=True)
class EvalResult:
    """Dataset level errors, with empirical p-values when a baseline is given."""

    mad: float
    rmsd: float
    r2d: float
    p_mad: float | None = None
    p_rmsd: float | None = None
    p_r2d: float | None = None

    def as_dict(self) -> dict[str, float | None]:
        """Return the metric columns."""
        return {
            "mad": self.mad,
            "rmsd": self.rmsd,
            "r2d": self.r2d,
            "p_mad": self.p_mad,
            "p_rmsd": self.p_rmsd,
            "p_r2d": self.p_r2d,
        }


@dataclass(frozen=True)
class QcResult:
    """Per-sample mAD and the outlier flags."""

    samples: tuple[str, ...]
    mad: np.ndarray
    flags: np.ndarray
    median: float
    spread: float


@dataclass(frozen=True)
class KendallResult:
    """Tau-b with its two-sided p-value."""

    tau: float
    p_value: float


def _pair(
    truth: PercentageMatrix | np.ndarray, estimate: PercentageMatrix | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(truth, PercentageMatrix) and isinstance(estimate, PercentageMatrix):
        if set(truth.celltype_labels) != set(estimate.celltype_labels) or set(
            truth.sample_labels
        ) != set(estimate.sample_labels):
            raise DeconvDataException(ERROR.SHAPE_MISMATCH, "labels differ")
        rows = [estimate.celltype_labels.index(label) for label in truth.celltype_labels]
        cols = [estimate.sample_labels.index(label) for label in truth.sample_labels]
        return truth.values, estimate.values[np.ix_(rows, cols)]
    left = np.asarray(getattr(truth, "values", truth), dtype=float)
    right = np.asarray(getattr(estimate, "values", estimate), dtype=float)
    if left.shape != right.shape:
        raise DeconvDataException(ERROR.SHAPE_MISMATCH, (left.shape, right.shape))
    return left, right


def mad(truth: PercentageMatrix | np.ndarray, estimate: PercentageMatrix | np.ndarray) -> float:
    """Mean absolute difference, in percentage points."""
    left, right = _pair(truth, estimate)
    return float(np.mean(np.abs(left - right)))


def rmsd(truth: PercentageMatrix | np.ndarray, estimate: PercentageMatrix | np.ndarray) -> float:
    """Root mean squared difference, in percentage points."""
    left, right = _pair(truth, estimate)
    return float(np.sqrt(np.mean((left - right) ** 2)))


def r2d(truth: PercentageMatrix | np.ndarray, estimate: PercentageMatrix | np.ndarray) -> float:
    """One minus the Pearson correlation of the flattened matrices.

    Exceptions: DeconvUndefinedCorrelationException.
    """
    left, right = _pair(truth, estimate)
    left = left.ravel()
    right = right.ravel()
    if left.size < 2 or np.ptp(left) == 0 or np.ptp(right) == 0:
        raise DeconvUndefinedCorrelationException(ERROR.UNDEFINED_CORRELATION, "zero variance")
    return float(1.0 - stats.pearsonr(left, right).statistic)


def _batch_metrics(truth: np.ndarray, draws: np.ndarray) -> dict[str, np.ndarray]:
    """Metrics of many estimates (draws x q x p) against one truth."""
    diff = draws - truth
    flat_truth = truth.ravel() - truth.mean()
    flat = draws.reshape(draws.shape[0], -1)
    centered = flat - flat.mean(axis=1, keepdims=True)
    corr = centered @ flat_truth / (
        np.linalg.norm(centered, axis=1) * np.linalg.norm(flat_truth)
    )
    return {
        "mad": np.abs(diff).mean(axis=(1, 2)),
        "rmsd": np.sqrt((diff**2).mean(axis=(1, 2))),
        "r2d": 1.0 - corr,
    }


@dataclass(frozen=True)
class RandomBaseline:
    """Metrics of random simplex estimates against the truth.

    Draws come in fixed chunks, each from its own SeedSequence child, so
    the values do not depend on how the work is split.
    """

    samples: int
    seed: int
    values: dict[str, np.ndarray]

    @classmethod
    def draw(
        cls,
        truth: PercentageMatrix | np.ndarray,
        samples: int = CONST.BASELINE_SAMPLES,
        seed: int = 0,
    ) -> RandomBaseline:
        """Sample random concentrations and score them against truth."""
        if samples < 1:
            raise DeconvDataException(ERROR.INVALID_SETTING_VALUE, ("samples", samples))
        target = np.asarray(getattr(truth, "values", truth), dtype=float)
        chunks = math.ceil(samples / CONST.BASELINE_CHUNK)
        sequences = np.random.SeedSequence(seed).spawn(chunks)
        parts: dict[str, list[np.ndarray]] = {metric: [] for metric in METRICS}
        remaining = samples
        for sequence in sequences:
            size = min(CONST.BASELINE_CHUNK, remaining)
            remaining -= size
            draws = random_simplex_percentages(np.random.default_rng(sequence), size, *target.shape)
            for metric, values in _batch_metrics(target, draws).items():
                parts[metric].append(values)
        values = {metric: np.concatenate(parts[metric]) for metric in METRICS}
        return cls(samples, seed, values)


def random_simplex_percentages(
    rng: np.random.Generator, size: int, n_types: int, n_samples: int
) -> np.ndarray:
    """Draw size matrices whose columns are iid Uniform(0, 1) divided by their sum."""
    draws = rng.uniform(0.0, 1.0, size=(size, n_types, n_samples))
    return 100.0 * draws / draws.sum(axis=1, keepdims=True)


def empirical_pvalue(metric: str, observed: float, baseline: RandomBaseline) -> float:
    """Share of random draws at least as good as observed, floored at 1/S."""
    sampled = baseline.values[metric]
    count = int(np.sum(sampled <= observed))
    return max(count, 1) / baseline.samples


def evaluate(
    truth: PercentageMatrix,
    estimate: PercentageMatrix,
    baseline: RandomBaseline | None = None,
) -> EvalResult:
    """Score an estimate, adding p-values when a baseline is given."""
    values = {"mad": mad(truth, estimate), "rmsd": rmsd(truth, estimate)}
    try:
        values["r2d"] = r2d(truth, estimate)
    except DeconvUndefinedCorrelationException as err:
        _LOGGER.warning("R2D undefined: %s", err)
        values["r2d"] = float("nan")
    if baseline is None:
        return EvalResult(**values)
    pvalues = {
        f"p_{metric}": empirical_pvalue(metric, value, baseline)
        if np.isfinite(value)
        else None
        for metric, value in values.items()
    }
    return EvalResult(**values, **pvalues)


def per_sample_qc(
    truth: PercentageMatrix,
    estimate: PercentageMatrix,
    threshold: float = CONST.QC_THRESHOLD,
) -> QcResult:
    """Flag samples whose mAD exceeds median + threshold * MAD."""
    left, right = _pair(truth, estimate)
    errors = np.abs(left - right).mean(axis=0)
    median = float(np.median(errors))
    spread = float(stats.median_abs_deviation(errors, scale=1.0))
    if errors.shape[0] < 2:
        flags = np.zeros(errors.shape[0], dtype=bool)
    else:
        flags = errors > median + threshold * spread
    return QcResult(tuple(truth.sample_labels), errors, flags, median, spread)


def _tied_permutation_pvalue(x: np.ndarray, y: np.ndarray) -> float:
    """Exact p-value by enumerating every pairing of y against x."""
    n = x.shape[0]
    upper, lower = np.triu_indices(n, k=1)
    x_signs = np.sign(x[lower] - x[upper])
    observed = abs(float(x_signs @ np.sign(y[lower] - y[upper])))
    extreme = 0
    total = 0
    orders = permutations(range(n))
    while True:
        chunk = np.array(list(islice(orders, _PERMUTATION_CHUNK)), dtype=np.intp)
        if chunk.size == 0:
            break
        shuffled = y[chunk]
        scores = np.abs(np.sign(shuffled[:, lower] - shuffled[:, upper]) @ x_signs)
        extreme += int(np.sum(scores >= observed - 1e-9))
        total += chunk.shape[0]
    return extreme / total


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> KendallResult:
    """Kendall tau-b with a two-sided p-value.

    The p-value is asymptotic above ten points and exact otherwise.
    Exceptions: DeconvDataException, DeconvUndefinedCorrelationException.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] < 2:
        raise DeconvDataException(ERROR.SHAPE_MISMATCH, (x.shape, y.shape))
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DeconvUndefinedCorrelationException(ERROR.UNDEFINED_CORRELATION, "all tied")
    n = x.shape[0]
    if n > CONST.KENDALL_EXACT_MAX:
        result = stats.kendalltau(x, y, variant="b", method="asymptotic")
        return KendallResult(float(result.statistic), float(result.pvalue))
    ties = np.unique(x).shape[0] < n or np.unique(y).shape[0] < n
    if not ties:
        result = stats.kendalltau(x, y, variant="b", method="exact")
        return KendallResult(float(result.statistic), float(result.pvalue))
    tau = float(stats.kendalltau(x, y, variant="b").statistic)
    return KendallResult(tau, _tied_permutation_pvalue(x, y))


def measure_agreement(rows: pd.DataFrame) -> pd.DataFrame:
    """Kendall tau between every pair of error measures across configurations."""
    records = []
    for first, second in combinations(METRICS, 2):
        valid = rows[[first, second]].apply(pd.to_numeric, errors="coerce").dropna()
        tau = p_value = float("nan")
        if len(valid) >= 2:
            try:
                result = kendall_tau(valid[first].to_numpy(), valid[second].to_numpy())
                tau, p_value = result.tau, result.p_value
            except DeconvUndefinedCorrelationException as err:
                _LOGGER.debug("No agreement for %s/%s: %s", first, second, err)
        records.append(
            {
                "measure_a": first,
                "measure_b": second,
                "tau": tau,
                "p_value": p_value,
                "neg_log10_p": -math.log10(p_value) if p_value > 0 else float("nan"),
            }
        )
    return pd.DataFrame(
        records, columns=["measure_a", "measure_b", "tau", "p_value", "neg_log10_p"]
    )


def delta_mad(reference_rows: pd.DataFrame, filtered_rows: pd.DataFrame) -> pd.DataFrame:
    """Change in mAD per configuration between two runs (filtered minus reference)."""
    merged = reference_rows[CONFIG_KEYS + ["mad"]].merge(
        filtered_rows[CONFIG_KEYS + ["mad"]],
        on=CONFIG_KEYS,
        suffixes=("_reference", "_filtered"),
    )
    merged["delta_mad"] = pd.to_numeric(merged["mad_filtered"], errors="coerce") - pd.to_numeric(
        merged["mad_reference"], errors="coerce"
    )
    return merged
