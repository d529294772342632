"""Test the matrix types and their conversions."""

import numpy as np
import pytest

from aiodeconv import exceptions
from aiodeconv.model import (
    ConcentrationMatrix,
    ExpressionMatrix,
    PercentageMatrix,
    ReplicateGrouping,
    collapse_replicates,
    percent_to_concentration,
    to_percentages,
    validate_alignment,
)


def test_expression_matrix() -> None:
    """Test validation and selection on expression matrices."""
    matrix = ExpressionMatrix(("g1", "g2", "g3"), ("a", "b"), [[1, 2], [0, 4], [8, 0]])
    assert matrix.shape == (3, 2)
    assert matrix.column("b").tolist() == [2, 4, 0]
    assert matrix.select_rows(["g3", "g1"]).values.tolist() == [[8, 0], [1, 2]]
    assert matrix.select_columns(["b"]).col_labels == ("b",)
    assert matrix.restrict(np.array([True, False, True])).row_labels == ("g1", "g3")
    assert matrix.log2_max().tolist() == [1.0, 2.0, 3.0]
    assert matrix.to_frame().index.name == "gene"
    rebuilt = ExpressionMatrix.from_frame(matrix.to_frame())
    assert rebuilt.row_labels == matrix.row_labels
    assert np.array_equal(rebuilt.values, matrix.values)

    # Values are read only
    with pytest.raises(ValueError):
        matrix.values[0, 0] = 5

    # Test the invalid constructions
    with pytest.raises(exceptions.DeconvEmptyBasisException):
        matrix.restrict(np.zeros(3, dtype=bool))
    with pytest.raises(exceptions.DeconvDataException):
        ExpressionMatrix(("g1",), ("a",), [[-1.0]])
    with pytest.raises(exceptions.DeconvDataException):
        ExpressionMatrix(("g1", "g1"), ("a",), [[1.0], [2.0]])
    with pytest.raises(exceptions.DeconvDataException):
        ExpressionMatrix(("g1",), ("a", "b"), [[1.0]])
    with pytest.raises(exceptions.DeconvDataException):
        ExpressionMatrix(("g1",), ("a",), [[np.nan]])


def test_collapse_replicates() -> None:
    """Test averaging replicate columns per cell-type."""
    # Two replicates of type A
    replicates = ExpressionMatrix(("g1",), ("a1", "a2"), [[1.0, 3.0]])
    grouping = ReplicateGrouping({"a1": "A", "a2": "A"})
    collapsed = collapse_replicates(replicates, grouping)
    assert collapsed.col_labels == ("A",)
    assert collapsed.values.tolist() == [[2.0]]

    # One replicate per type only relabels
    single = ExpressionMatrix(("g1", "g2"), ("x", "y"), [[1.0, 2.0], [3.0, 4.0]])
    collapsed = collapse_replicates(single, ReplicateGrouping({"x": "A", "y": "B"}))
    assert collapsed.col_labels == ("A", "B")
    assert np.array_equal(collapsed.values, single.values)

    # Random table against a sum/count oracle
    rng = np.random.default_rng(3)
    values = rng.uniform(0, 10, size=(6, 6))
    columns = ("a1", "b1", "a2", "b2", "a3", "b3")
    mapping = {column: column[0].upper() for column in columns}
    collapsed = collapse_replicates(
        ExpressionMatrix(tuple(f"g{i}" for i in range(6)), columns, values),
        ReplicateGrouping(mapping),
    )
    for index, celltype in enumerate(("A", "B")):
        members = [j for j, column in enumerate(columns) if mapping[column] == celltype]
        oracle = [sum(values[i, j] for j in members) / len(members) for i in range(6)]
        assert collapsed.values[:, index] == pytest.approx(oracle, rel=1e-12)

    # Unmapped column
    with pytest.raises(exceptions.DeconvDataException):
        collapse_replicates(replicates, ReplicateGrouping({"a1": "A"}))
    # Cell-type without columns
    with pytest.raises(exceptions.DeconvDataException):
        ReplicateGrouping({"a1": "A"}, ("A", "B"))


def test_percentages() -> None:
    """Test converting concentrations to percentages and back."""
    pairs = [
        ([[2.0], [2.0]], [50.0, 50.0]),
        ([[1.0], [0.0], [0.0]], [100.0, 0.0, 0.0]),
        ([[0.2], [0.3], [0.5]], [20.0, 30.0, 50.0]),
    ]
    for values, expected in pairs:
        labels = tuple(f"t{i}" for i in range(len(values)))
        percent = to_percentages(ConcentrationMatrix(labels, ("s",), values))
        assert isinstance(percent, PercentageMatrix)
        assert percent.values[:, 0] == pytest.approx(expected)

    concentrations = ConcentrationMatrix(("a", "b"), ("s1", "s2"), [[0.2, 0.9], [0.8, 0.1]])
    assert concentrations.sto_satisfied and concentrations.nonneg_satisfied
    back = percent_to_concentration(to_percentages(concentrations))
    assert back.values == pytest.approx(concentrations.values)

    # Raw solver output records which constraints hold
    raw = ConcentrationMatrix(("a", "b"), ("s1",), [[-0.1], [0.7]])
    assert not raw.nonneg_satisfied
    assert not raw.sto_satisfied

    with pytest.raises(exceptions.DeconvDegenerateException):
        to_percentages(ConcentrationMatrix(("a", "b"), ("s",), [[0.0], [0.0]]))
    with pytest.raises(exceptions.DeconvDegenerateException):
        to_percentages(raw)
    with pytest.raises(exceptions.DeconvDataException):
        PercentageMatrix(("a", "b"), ("s",), np.array([[40.0], [40.0]]))


def test_validate_alignment() -> None:
    """Test restricting mixture and reference to their shared genes."""
    mixture = ExpressionMatrix(
        ("g5", "g1", "g4", "g2", "g3"), ("s",), [[5.0], [1.0], [4.0], [2.0], [3.0]]
    )
    reference = ExpressionMatrix(("g3", "g2", "g1"), ("A",), [[30.0], [20.0], [10.0]])
    aligned = validate_alignment(mixture, reference)
    assert aligned.mixture.row_labels == aligned.reference.row_labels == ("g1", "g2", "g3")
    assert aligned.mixture.values[:, 0].tolist() == [1.0, 2.0, 3.0]
    assert aligned.reference.values[:, 0].tolist() == [10.0, 20.0, 30.0]
    assert aligned.dropped_mixture == 2
    assert aligned.dropped_reference == 0

    # Identical gene sets are unchanged
    same = validate_alignment(aligned.mixture, aligned.reference)
    assert np.array_equal(same.mixture.values, aligned.mixture.values)
    assert same.dropped_mixture == same.dropped_reference == 0

    with pytest.raises(exceptions.DeconvDataException):
        validate_alignment(mixture, ExpressionMatrix(("x",), ("A",), [[1.0]]))
