"""Matrix data model used by AIODeconv.

Expression matrices hold linear-scale (not log) intensities with labeled rows
(genes) and columns (samples or references). The same type houses the
mixture matrix M (genes x samples), the replicate signature H
(genes x replicate columns) and the reference profile G (genes x cell-types).
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import logging

import numpy as np
import pandas as pd

from .exceptions import (
    DeconvDataException,
    DeconvDegenerateException,
    DeconvEmptyBasisException,
)
from .helpers import const as CONST
from .helpers import errors as ERROR

_LOGGER = logging.getLogger(__name__)


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


def _check_unique(labels: Sequence[str], error: tuple[int, str]) -> None:
    seen: set[str] = set()
    for label in labels:
        if label in seen:
            raise DeconvDataException(error, label)
        seen.add(label)


@dataclass(frozen=True)
class ExpressionMatrix:
    """Non-negative gene x column expression matrix."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        """Validate labels and values, then freeze the array."""
        rows = tuple(str(label) for label in self.row_labels)
        cols = tuple(str(label) for label in self.col_labels)
        values = _frozen(self.values)
        if values.ndim != 2 or values.shape != (len(rows), len(cols)):
            raise DeconvDataException(
                ERROR.SHAPE_MISMATCH, (values.shape, len(rows), len(cols))
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DeconvDataException(ERROR.NEGATIVE_VALUE)
        _check_unique(rows, ERROR.DUPLICATE_GENE)
        _check_unique(cols, ERROR.DUPLICATE_COLUMN)
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        """Return (genes, columns)."""
        return self.values.shape  # type: ignore[return-value]

    def column(self, label: str) -> np.ndarray:
        """Return one column as a vector."""
        return self.values[:, self.col_labels.index(label)]

    def select_rows(self, labels: Sequence[str]) -> ExpressionMatrix:
        """Return the matrix restricted to the given genes, in that order."""
        index = {label: pos for pos, label in enumerate(self.row_labels)}
        rows = [index[label] for label in labels]
        return ExpressionMatrix(tuple(labels), self.col_labels, self.values[rows])

    def select_columns(self, labels: Sequence[str]) -> ExpressionMatrix:
        """Return the matrix restricted to the given columns, in that order."""
        cols = [self.col_labels.index(label) for label in labels]
        return ExpressionMatrix(self.row_labels, tuple(labels), self.values[:, cols])

    def restrict(self, keep: np.ndarray) -> ExpressionMatrix:
        """Return the rows flagged in a boolean vector, order preserved."""
        keep = np.asarray(keep, dtype=bool)
        if not keep.any():
            raise DeconvEmptyBasisException(ERROR.EMPTY_BASIS)
        rows = tuple(label for label, flag in zip(self.row_labels, keep) if flag)
        return ExpressionMatrix(rows, self.col_labels, self.values[keep])

    def log2_max(self) -> np.ndarray:
        """Return log2 of every row maximum; all-zero rows give -inf."""
        with np.errstate(divide="ignore"):
            return np.log2(self.values.max(axis=1))

    def to_frame(self, index_name: str = CONST.GENE) -> pd.DataFrame:
        """Return a labeled DataFrame copy."""
        frame = pd.DataFrame(
            np.array(self.values),
            index=pd.Index(self.row_labels, name=index_name),
            columns=list(self.col_labels),
        )
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> ExpressionMatrix:
        """Build from a DataFrame indexed by gene."""
        return cls(
            tuple(str(label) for label in frame.index),
            tuple(str(label) for label in frame.columns),
            frame.to_numpy(dtype=float),
        )


@dataclass(frozen=True)
class ReplicateGrouping:
    """Mapping from replicate columns of H to cell-types."""

    mapping: Mapping[str, str]
    celltypes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        """Derive the cell-type order when absent and check every group."""
        mapping = dict(self.mapping)
        celltypes = tuple(self.celltypes) or tuple(dict.fromkeys(mapping.values()))
        _check_unique(celltypes, ERROR.DUPLICATE_COLUMN)
        for column, celltype in mapping.items():
            if celltype not in celltypes:
                raise DeconvDataException(ERROR.UNMAPPED_COLUMN, (column, celltype))
        for celltype in celltypes:
            if celltype not in mapping.values():
                raise DeconvDataException(ERROR.EMPTY_GROUP, celltype)
        object.__setattr__(self, "mapping", mapping)
        object.__setattr__(self, "celltypes", celltypes)

    def columns_for(self, celltype: str) -> list[str]:
        """Return the replicate columns of a cell-type, in mapping order."""
        return [col for col, value in self.mapping.items() if value == celltype]


def _constraint_flags(values: np.ndarray) -> tuple[bool, bool]:
    nonneg = bool(np.all(values >= 0))
    sto = bool(
        values.shape[1] == 0
        or np.all(np.abs(values.sum(axis=0) - 1.0) <= CONST.STO_TOL)
    )
    return nonneg, sto


@dataclass(frozen=True)
class ConcentrationMatrix:
    """Cell-type x sample coefficient matrix C."""

    celltype_labels: tuple[str, ...]
    sample_labels: tuple[str, ...]
    values: np.ndarray
    nonneg_satisfied: bool = field(init=False)
    sto_satisfied: bool = field(init=False)

    def __post_init__(self) -> None:
        """Validate shape, then record which constraints hold."""
        values = _frozen(self.values)
        celltypes = tuple(str(label) for label in self.celltype_labels)
        samples = tuple(str(label) for label in self.sample_labels)
        if values.ndim != 2 or values.shape != (len(celltypes), len(samples)):
            raise DeconvDataException(
                ERROR.SHAPE_MISMATCH, (values.shape, len(celltypes), len(samples))
            )
        if not np.all(np.isfinite(values)):
            raise DeconvDataException(ERROR.NEGATIVE_VALUE)
        nonneg, sto = _constraint_flags(values)
        object.__setattr__(self, "celltype_labels", celltypes)
        object.__setattr__(self, "sample_labels", samples)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "nonneg_satisfied", nonneg)
        object.__setattr__(self, "sto_satisfied", sto)

    @classmethod
    def from_columns(
        cls,
        celltype_labels: Sequence[str],
        columns: Mapping[str, np.ndarray],
    ) -> ConcentrationMatrix:
        """Stack per-sample coefficient vectors."""
        samples = tuple(columns)
        values = np.column_stack([np.asarray(columns[s], float) for s in samples])
        return cls(tuple(celltype_labels), samples, values)

    def column(self, sample: str) -> np.ndarray:
        """Return the coefficients of one sample."""
        return self.values[:, self.sample_labels.index(sample)]

    def select_samples(self, samples: Sequence[str]) -> ConcentrationMatrix:
        """Return the matrix restricted to the given samples."""
        cols = [self.sample_labels.index(sample) for sample in samples]
        return ConcentrationMatrix(
            self.celltype_labels, tuple(samples), self.values[:, cols]
        )

    def select_celltypes(self, celltypes: Sequence[str]) -> ConcentrationMatrix:
        """Return the matrix restricted to the given cell-types."""
        rows = [self.celltype_labels.index(label) for label in celltypes]
        return ConcentrationMatrix(
            tuple(celltypes), self.sample_labels, self.values[rows]
        )

    def to_frame(self) -> pd.DataFrame:
        """Return a labeled DataFrame copy."""
        return pd.DataFrame(
            np.array(self.values),
            index=pd.Index(self.celltype_labels, name=CONST.CELLTYPE),
            columns=list(self.sample_labels),
        )


@dataclass(frozen=True)
class PercentageMatrix:
    """Cell-type x sample percentages; every column sums to 100."""

    celltype_labels: tuple[str, ...]
    sample_labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        """Validate range and column sums."""
        values = _frozen(self.values)
        if values.shape != (len(self.celltype_labels), len(self.sample_labels)):
            raise DeconvDataException(ERROR.SHAPE_MISMATCH, values.shape)
        sums = values.sum(axis=0)
        if (
            np.any(values < -CONST.PERCENT_TOL)
            or np.any(values > 100 + CONST.PERCENT_TOL)
            or np.any(np.abs(sums - 100.0) > CONST.PERCENT_TOL)
        ):
            raise DeconvDataException(ERROR.SHAPE_MISMATCH, "columns must sum to 100")
        object.__setattr__(self, "celltype_labels", tuple(self.celltype_labels))
        object.__setattr__(self, "sample_labels", tuple(self.sample_labels))
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        """Return (cell-types, samples)."""
        return self.values.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class AlignedPair:
    """Mixture and reference restricted to their shared genes."""

    mixture: ExpressionMatrix
    reference: ExpressionMatrix
    dropped_mixture: int
    dropped_reference: int


def collapse_replicates(
    replicates: ExpressionMatrix, grouping: ReplicateGrouping
) -> ExpressionMatrix:
    """Average replicate columns per cell-type in linear space.

    Replicates are averaged as given, without per-replicate rescaling.
    Exceptions: DeconvDataException.
    """
    for column in replicates.col_labels:
        if column not in grouping.mapping:
            raise DeconvDataException(ERROR.UNMAPPED_COLUMN, column)
    columns = []
    for celltype in grouping.celltypes:
        members = [
            replicates.col_labels.index(col)
            for col in grouping.columns_for(celltype)
            if col in replicates.col_labels
        ]
        if not members:
            raise DeconvDataException(ERROR.EMPTY_GROUP, celltype)
        columns.append(replicates.values[:, members].mean(axis=1))
    return ExpressionMatrix(
        replicates.row_labels, grouping.celltypes, np.column_stack(columns)
    )


def to_percentages(
    concentrations: ConcentrationMatrix | PercentageMatrix,
) -> PercentageMatrix:
    """Normalize every column to sum to one and scale to percentages.

    Exceptions: DeconvDegenerateException.
    """
    values = np.asarray(concentrations.values, dtype=float)
    sums = values.sum(axis=0)
    if np.any(values < 0) or np.any(sums <= 0):
        raise DeconvDegenerateException(ERROR.DEGENERATE_SOLUTION)
    return PercentageMatrix(
        concentrations.celltype_labels,
        concentrations.sample_labels,
        100.0 * values / sums,
    )


def percent_to_concentration(percentages: PercentageMatrix) -> ConcentrationMatrix:
    """Turn percentages back into fractions."""
    return ConcentrationMatrix(
        percentages.celltype_labels,
        percentages.sample_labels,
        percentages.values / 100.0,
    )


def validate_alignment(
    mixture: ExpressionMatrix, reference: ExpressionMatrix
) -> AlignedPair:
    """Restrict both matrices to their shared genes in the mixture's order.

    Exceptions: DeconvDataException.
    """
    shared = set(reference.row_labels)
    genes = [gene for gene in mixture.row_labels if gene in shared]
    if not genes:
        raise DeconvDataException(ERROR.EMPTY_INTERSECTION)
    dropped_mixture = len(mixture.row_labels) - len(genes)
    dropped_reference = len(reference.row_labels) - len(genes)
    if dropped_mixture or dropped_reference:
        _LOGGER.debug(
            "Alignment dropped %s mixture and %s reference genes",
            dropped_mixture,
            dropped_reference,
        )
    return AlignedPair(
        mixture.select_rows(genes),
        reference.select_rows(genes),
        dropped_mixture,
        dropped_reference,
    )

