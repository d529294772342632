"""TSV ingestion and result writers."""

from __future__ import annotations

from dataclasses import dataclass
import io
import logging

import numpy as np
import pandas as pd

from . import utils as UTILS
from .exceptions import DeconvDataException
from .helpers import const as CONST
from .helpers import errors as ERROR
from .model import (
    ConcentrationMatrix,
    ExpressionMatrix,
    ReplicateGrouping,
    collapse_replicates,
)

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Everything one run reads from disk.

    replicates and grouping are set when the reference came as a replicate
    table; reference is then their per-cell-type mean.
    """

    mixture: ExpressionMatrix
    reference: ExpressionMatrix
    replicates: ExpressionMatrix | None = None
    grouping: ReplicateGrouping | None = None
    truth: ConcentrationMatrix | None = None


@dataclass(frozen=True)
class _Table:
    header: list[str]
    cells: pd.DataFrame
    lines: np.ndarray


def _read_cells(text: str, filename: str, key: str) -> _Table:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DeconvDataException(ERROR.MALFORMED_HEADER, f"{filename}:1 empty file")
    header = lines[0].split("\t")
    if header[0] != key or len(header) < 2 or any(not name for name in header):
        raise DeconvDataException(
            ERROR.MALFORMED_HEADER, f"{filename}:1 expected '{key}' followed by columns"
        )
    seen: set[str] = set()
    for name in header:
        if name in seen:
            raise DeconvDataException(ERROR.DUPLICATE_COLUMN, f"{filename}:1 {name}")
        seen.add(name)
    try:
        cells = pd.read_csv(
            io.StringIO(text),
            sep="\t",
            dtype=str,
            index_col=False,
            keep_default_na=False,
            na_filter=False,
        )
    except (pd.errors.ParserError, ValueError) as ex:
        raise DeconvDataException(ERROR.MALFORMED_HEADER, f"{filename}: {ex}") from ex
    # pandas skips blank lines, so map rows back to their line in the file
    numbers = np.array(
        [number for number, line in enumerate(lines[1:], start=2) if line.strip()], dtype=int
    )
    if numbers.shape[0] != len(cells):
        numbers = np.arange(len(cells)) + 2
    return _Table(header, cells, numbers)


def _numeric(table: _Table, filename: str, columns: list[str]) -> np.ndarray:
    cells = table.cells[columns].to_numpy(dtype=str)
    try:
        values = cells.astype(float)
    except ValueError:
        values = np.full(cells.shape, np.nan)
    if not np.all(np.isfinite(values)):
        for row, line in enumerate(table.lines):
            for col, cell in enumerate(cells[row]):
                try:
                    number = float(cell)
                except ValueError:
                    number = float("nan")
                if not np.isfinite(number):
                    raise DeconvDataException(
                        ERROR.NON_NUMERIC_CELL, f"{filename}:{line} {columns[col]}='{cell}'"
                    )
    negative = np.argwhere(values < 0)
    if negative.size:
        row, col = negative[0]
        raise DeconvDataException(
            ERROR.NEGATIVE_VALUE, f"{filename}:{table.lines[row]} {columns[col]}"
        )
    return values


def _unique_labels(table: _Table, filename: str, key: str) -> tuple[str, ...]:
    labels = table.cells[key].tolist()
    seen: set[str] = set()
    for label, line in zip(labels, table.lines):
        if label in seen:
            raise DeconvDataException(ERROR.DUPLICATE_GENE, f"{filename}:{line} {label}")
        seen.add(label)
    return tuple(labels)


def parse_expression(text: str, filename: str = "<text>") -> ExpressionMatrix:
    """Parse a gene x column expression table.

    Exceptions: DeconvDataException.
    """
    table = _read_cells(text, filename, CONST.GENE)
    columns = table.header[1:]
    values = _numeric(table, filename, columns)
    genes = _unique_labels(table, filename, CONST.GENE)
    return ExpressionMatrix(genes, tuple(columns), values.reshape(len(genes), len(columns)))


def parse_replicate_map(text: str, filename: str = "<text>") -> ReplicateGrouping:
    """Parse a column -> cell-type table.

    Exceptions: DeconvDataException.
    """
    table = _read_cells(text, filename, CONST.COLUMN)
    if table.header != [CONST.COLUMN, CONST.CELLTYPE]:
        raise DeconvDataException(
            ERROR.MALFORMED_HEADER, f"{filename}:1 expected column<TAB>celltype"
        )
    columns = _unique_labels(table, filename, CONST.COLUMN)
    return ReplicateGrouping(dict(zip(columns, table.cells[CONST.CELLTYPE].tolist())))


def parse_concentrations(
    text: str, filename: str = "<text>", config_id: str | None = None
) -> ConcentrationMatrix:
    """Parse a cell-type x sample table.

    Tables written by a run carry a leading config_id column; config_id
    picks one block of them.
    Exceptions: DeconvDataException.
    """
    if text.startswith(CONST.CONFIG_ID + "\t"):
        table = _read_cells(text, filename, CONST.CONFIG_ID)
        if len(table.header) < 3 or table.header[1] != CONST.CELLTYPE:
            raise DeconvDataException(ERROR.MALFORMED_HEADER, f"{filename}:1")
        ids = table.cells[CONST.CONFIG_ID]
        if config_id is None:
            if ids.nunique() > 1:
                raise DeconvDataException(
                    ERROR.MISSING_INPUT, f"{filename} holds several configurations"
                )
            config_id = str(ids.iloc[0]) if len(ids) else ""
        chosen = (ids == str(config_id)).to_numpy()
        if not chosen.any():
            raise DeconvDataException(ERROR.MISSING_INPUT, f"{filename}: config {config_id}")
        table = _Table(
            table.header[1:],
            table.cells.loc[chosen, table.header[1:]].reset_index(drop=True),
            table.lines[chosen],
        )
    else:
        table = _read_cells(text, filename, CONST.CELLTYPE)
    samples = table.header[1:]
    values = _numeric(table, filename, samples)
    celltypes = _unique_labels(table, filename, CONST.CELLTYPE)
    return ConcentrationMatrix(celltypes, tuple(samples), values)


async def async_read_expression(filename: str) -> ExpressionMatrix:
    """Read an expression table."""
    return parse_expression(await UTILS.async_read_text(filename), filename)


async def async_read_replicate_map(filename: str) -> ReplicateGrouping:
    """Read a replicate map."""
    return parse_replicate_map(await UTILS.async_read_text(filename), filename)


async def async_read_concentrations(
    filename: str, config_id: str | None = None
) -> ConcentrationMatrix:
    """Read a concentration table."""
    return parse_concentrations(await UTILS.async_read_text(filename), filename, config_id)


async def async_ingest(
    mixture: str,
    reference: str,
    replicates: str = "",
    truth: str = "",
) -> Dataset:
    """Read mixture, reference and the optional replicate map and truth.

    With a replicate map the reference holds replicate columns, which are
    averaged per cell-type.
    Exceptions: DeconvDataException.
    """
    mixture_matrix = await async_read_expression(mixture)
    reference_matrix = await async_read_expression(reference)
    replicate_matrix = grouping = None
    if replicates:
        grouping = await async_read_replicate_map(replicates)
        replicate_matrix = reference_matrix
        reference_matrix = collapse_replicates(replicate_matrix, grouping)
    truth_matrix = await async_read_concentrations(truth) if truth else None
    _LOGGER.debug(
        "Ingested mixture %s and reference %s", mixture_matrix.shape, reference_matrix.shape
    )
    return Dataset(mixture_matrix, reference_matrix, replicate_matrix, grouping, truth_matrix)


def frame_to_tsv(frame: pd.DataFrame, index: bool = False) -> str:
    """Render a frame as TSV with shortest round-trip floats."""
    return frame.to_csv(sep="\t", index=index, lineterminator="\n", na_rep="")


async def async_write_frame(filename: str, frame: pd.DataFrame, index: bool = False) -> None:
    """Write a frame as TSV."""
    await UTILS.async_write_text(filename, frame_to_tsv(frame, index))


async def async_write_expression(filename: str, matrix: ExpressionMatrix) -> None:
    """Write an expression table."""
    await async_write_frame(filename, matrix.to_frame(), index=True)


async def async_write_concentrations(filename: str, matrix: ConcentrationMatrix) -> None:
    """Write a concentration table."""
    await async_write_frame(filename, matrix.to_frame(), index=True)


async def async_write_replicate_map(filename: str, grouping: ReplicateGrouping) -> None:
    """Write a replicate map."""
    frame = pd.DataFrame(
        {CONST.COLUMN: list(grouping.mapping), CONST.CELLTYPE: list(grouping.mapping.values())}
    )
    await async_write_frame(filename, frame)
