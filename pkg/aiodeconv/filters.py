"""Gene filters: STO violations, fixed expression range and adaptive range."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd

from . import utils as UTILS
from .exceptions import (
    DeconvDataException,
    DeconvEmptyBasisException,
    DeconvUsageException,
)
from .helpers import const as CONST
from .helpers import errors as ERROR
from .helpers.const import (
    KneeNormalization,
    ViolationCategory,
    ViolationDrop,
    ViolationScope,
)
from .model import ExpressionMatrix

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class RangeBounds:
    """Expression range in log2 units.

    The defaulted flags mark a bound that fell back to the curve's extreme
    because its half held too few points.
    """

    lo: float
    hi: float
    lo_defaulted: bool = False
    hi_defaulted: bool = False

    def __post_init__(self) -> None:
        """Require lo < hi."""
        if not float(self.lo) < float(self.hi):
            raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("range", self.lo, self.hi))
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))


@dataclass(frozen=True)
class FeatureMask:
    """Per-gene keep flags with the filter that produced them."""

    keep: np.ndarray
    provenance: str = ""

    def __post_init__(self) -> None:
        """Freeze the flags."""
        keep = np.array(self.keep, dtype=bool).reshape(-1)
        keep.setflags(write=False)
        object.__setattr__(self, "keep", keep)

    def __and__(self, other: FeatureMask) -> FeatureMask:
        """Return the conjunction of two masks."""
        if len(self) != len(other):
            raise DeconvDataException(ERROR.SHAPE_MISMATCH, (len(self), len(other)))
        provenance = "+".join(tag for tag in (self.provenance, other.provenance) if tag)
        return FeatureMask(self.keep & other.keep, provenance)

    def __len__(self) -> int:
        """Return the number of genes."""
        return int(self.keep.shape[0])

    @property
    def retained(self) -> int:
        """Return the number of kept genes."""
        return int(self.keep.sum())

    @classmethod
    def everything(cls, genes: int, provenance: str = "none") -> FeatureMask:
        """Return a mask keeping every gene."""
        return cls(np.ones(genes, dtype=bool), provenance)


@dataclass(frozen=True)
class ViolationReport:
    """Outcome of the STO-violation filter.

    masks maps every sample to its mask; with AnySample they are identical.
    """

    categories: pd.DataFrame
    masks: dict[str, FeatureMask]
    scope: ViolationScope
    percent_violating_reference: float
    percent_violating_mixture: float

    def mask_for(self, sample: str) -> FeatureMask:
        """Return the mask of one sample."""
        return self.masks[sample]


@dataclass(frozen=True)
class SortedCurve:
    """Ascending log2 per-gene maxima with the matching gene labels."""

    genes: tuple[str, ...]
    values: np.ndarray


def _check_rows(mixture: ExpressionMatrix, reference: ExpressionMatrix) -> None:
    if mixture.row_labels != reference.row_labels:
        raise DeconvDataException(ERROR.SHAPE_MISMATCH, "matrices are not row-aligned")


def _joint(mixture: ExpressionMatrix, reference: ExpressionMatrix) -> np.ndarray:
    _check_rows(mixture, reference)
    return np.hstack([mixture.values, reference.values])


def _violation_codes(reference: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Return 0 for ok, 1 for violating reference, 2 for violating mixture."""
    low = m <= reference.min(axis=1)
    high = reference.max(axis=1) <= m
    return np.where(low, 1, np.where(high, 2, 0))


_CATEGORY_BY_CODE = (
    ViolationCategory.OK,
    ViolationCategory.VIOLATING_REFERENCE,
    ViolationCategory.VIOLATING_MIXTURE,
)


def sto_violation_categorize(
    reference: ExpressionMatrix, m: np.ndarray
) -> list[ViolationCategory]:
    """Label every gene by comparing m to the reference row range.

    m <= min(G row) is a violating reference, max(G row) <= m a violating
    mixture. A gene matching both is reported as a violating reference.
    """
    m = np.asarray(m, dtype=float).reshape(-1)
    if m.shape[0] != reference.shape[0]:
        raise DeconvDataException(ERROR.SHAPE_MISMATCH, (m.shape[0], reference.shape[0]))
    codes = _violation_codes(reference.values, m)
    return [_CATEGORY_BY_CODE[code] for code in codes]


def sto_violation_filter(
    reference: ExpressionMatrix,
    mixture: ExpressionMatrix,
    scope: ViolationScope = ViolationScope.PER_SAMPLE,
    categories: ViolationDrop = ViolationDrop.BOTH,
) -> ViolationReport:
    """Drop genes that break the sum-to-one assumption.

    Exceptions: DeconvDataException, DeconvEmptyBasisException.
    """
    _check_rows(mixture, reference)
    scope = ViolationScope(scope)
    categories = ViolationDrop(categories)
    codes = np.column_stack(
        [_violation_codes(reference.values, mixture.values[:, j]) for j in range(mixture.shape[1])]
    )
    if categories is ViolationDrop.BOTH:
        dropped = codes != 0
    else:
        dropped = codes == 2
    tag = f"sto_violation({scope.value},{categories.value})"
    if scope is ViolationScope.ANY_SAMPLE:
        shared = FeatureMask(~dropped.any(axis=1), tag)
        masks = {sample: shared for sample in mixture.col_labels}
    else:
        masks = {
            sample: FeatureMask(~dropped[:, j], tag)
            for j, sample in enumerate(mixture.col_labels)
        }
    for sample, mask in masks.items():
        if mask.retained == 0:
            raise DeconvEmptyBasisException(ERROR.EMPTY_BASIS, f"sto violation filter, {sample}")

    frame = pd.DataFrame(
        np.vectorize(lambda code: _CATEGORY_BY_CODE[code].value)(codes),
        index=pd.Index(mixture.row_labels, name=CONST.GENE),
        columns=list(mixture.col_labels),
    )
    percent_reference = float(100.0 * np.mean(codes == 1))
    percent_mixture = float(100.0 * np.mean(codes == 2))
    _LOGGER.debug(
        "STO violations: %.2f%% reference, %.2f%% mixture",
        percent_reference,
        percent_mixture,
    )
    return ViolationReport(frame, masks, scope, percent_reference, percent_mixture)


def fixed_range_mask(
    mixture: ExpressionMatrix,
    reference: ExpressionMatrix,
    bounds: RangeBounds,
) -> FeatureMask:
    """Keep genes whose every value lies in [2^lo, 2^hi] across M and G."""
    values = _joint(mixture, reference)
    keep = np.all((values >= 2.0**bounds.lo) & (values <= 2.0**bounds.hi), axis=1)
    return FeatureMask(keep, f"range({bounds.lo:g},{bounds.hi:g})")


def range_sweep(
    mixture: ExpressionMatrix,
    reference: ExpressionMatrix,
    lo: float = CONST.LOG2_LO,
    his: Sequence[float] = CONST.RANGE_SWEEP_HI,
) -> pd.DataFrame:
    """Percent of genes retained by the range filter for each upper bound."""
    values = _joint(mixture, reference)
    above_lo = np.all(values >= 2.0**lo, axis=1)
    row_max = values.max(axis=1)
    rows = []
    for hi in sorted(his):
        kept = int(np.sum(above_lo & (row_max <= 2.0**hi)))
        rows.append({"hi": float(hi), "retained": kept, "percent": 100.0 * kept / values.shape[0]})
    return pd.DataFrame(rows, columns=["hi", "retained", "percent"])


def sorted_expression_curve(
    mixture: ExpressionMatrix, reference: ExpressionMatrix
) -> SortedCurve:
    """Ascending log2 of each gene's maximum over [M | G].

    Genes whose maximum is not positive are left out.
    """
    values = _joint(mixture, reference)
    row_max = values.max(axis=1)
    positive = row_max > 0
    genes = np.array(mixture.row_labels, dtype=object)[positive]
    logged = np.log2(row_max[positive])
    order = np.argsort(logged, kind="stable")
    curve = logged[order]
    curve.setflags(write=False)
    return SortedCurve(tuple(genes[order]), curve)


def detect_knee(
    values: Sequence[float] | np.ndarray,
    normalization: KneeNormalization = KneeNormalization.UNIT,
    prefer_last: bool = False,
) -> int:
    """Return the index farthest from the chord joining the end points.

    Distances equal within a tiny tolerance count as ties; the first index
    wins unless prefer_last is set.
    Exceptions: DeconvDataException.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] < CONST.MIN_KNEE_POINTS:
        raise DeconvDataException(ERROR.NOT_ENOUGH_POINTS, values.shape[0])
    unit = KneeNormalization(normalization) is KneeNormalization.UNIT
    distances = UTILS.chord_distances(np.arange(values.shape[0]), values, unit=unit)
    ties = np.flatnonzero(distances >= distances.max() - CONST.KNEE_TIE_TOL)
    return int(ties[-1] if prefer_last else ties[0])


def knee_indices(
    curve: np.ndarray,
    normalization: KneeNormalization = KneeNormalization.UNIT,
) -> tuple[int, int, bool, bool]:
    """Return the lower and upper knee positions on a sorted curve.

    A half with fewer than three points falls back to its outer end, and
    the matching flag is set.
    Exceptions: DeconvDataException.
    """
    length = curve.shape[0]
    if length < CONST.MIN_KNEE_POINTS:
        raise DeconvDataException(ERROR.NOT_ENOUGH_POINTS, length)
    middle = (length - 1) // 2
    lower = curve[: middle + 1]
    upper = curve[middle:]

    lo_defaulted = lower.shape[0] < CONST.MIN_KNEE_POINTS
    if lo_defaulted:
        _LOGGER.warning("Lower half has %s points, using the curve minimum", lower.shape[0])
        lo_index = 0
    else:
        lo_index = detect_knee(lower, normalization)
    hi_defaulted = upper.shape[0] < CONST.MIN_KNEE_POINTS
    if hi_defaulted:
        _LOGGER.warning("Upper half has %s points, using the curve maximum", upper.shape[0])
        hi_index = length - 1
    else:
        hi_index = middle + detect_knee(upper, normalization, prefer_last=True)
    return lo_index, hi_index, lo_defaulted, hi_defaulted


def adaptive_range_bounds(
    mixture: ExpressionMatrix,
    reference: ExpressionMatrix,
    normalization: KneeNormalization = KneeNormalization.UNIT,
) -> RangeBounds:
    """Pick lower and upper bounds at the knees of the sorted expression curve.

    The curve is split at its middle point; each half gets its own chord.
    Exceptions: DeconvDataException.
    """
    curve = sorted_expression_curve(mixture, reference).values
    lo_index, hi_index, lo_defaulted, hi_defaulted = knee_indices(curve, normalization)
    lo = float(curve[lo_index])
    hi = float(curve[hi_index])
    if not lo < hi:
        raise DeconvDataException(ERROR.NOT_ENOUGH_POINTS, f"flat curve at {lo}")
    _LOGGER.debug("Adaptive range bounds: %s to %s", lo, hi)
    return RangeBounds(lo, hi, lo_defaulted, hi_defaulted)


def apply_mask(matrix: ExpressionMatrix, mask: FeatureMask) -> ExpressionMatrix:
    """Keep the flagged rows, order preserved.

    Exceptions: DeconvDataException, DeconvEmptyBasisException.
    """
    if len(mask) != matrix.shape[0]:
        raise DeconvDataException(ERROR.SHAPE_MISMATCH, (len(mask), matrix.shape[0]))
    return matrix.restrict(mask.keep)
