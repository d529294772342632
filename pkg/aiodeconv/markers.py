"""Marker gene scoring and condition-number basis selection."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import linalg, stats

from .exceptions import DeconvDataException, DeconvUsageException
from .helpers import const as CONST
from .helpers import errors as ERROR
from .helpers.const import MarkerMethod, PValueCombine
from .model import ExpressionMatrix, ReplicateGrouping

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarkerScore:
    """Differential expression score of one gene."""

    gene: str
    celltype: str
    p_value: float
    q_value: float
    fold_ratio: float


@dataclass(frozen=True)
class NewmanSelection:
    """Significant markers per cell-type, best fold ratio first."""

    markers: dict[str, list[MarkerScore]]
    without_markers: tuple[str, ...] = ()


@dataclass(frozen=True)
class BasisCut:
    """Nested basis matrices and the step with the smallest condition number."""

    genes: tuple[str, ...]
    curve: tuple[float, ...]
    chosen: int
    steps: tuple[tuple[str, ...], ...]
    exhausted: tuple[str, ...] = field(default=())

    @property
    def condition(self) -> float:
        """Return the condition number at the chosen step."""
        return self.curve[self.chosen]


def _group_values(
    replicates: ExpressionMatrix, grouping: ReplicateGrouping
) -> list[np.ndarray]:
    groups = []
    for celltype in grouping.celltypes:
        columns = [
            replicates.col_labels.index(column)
            for column in grouping.columns_for(celltype)
            if column in replicates.col_labels
        ]
        if len(columns) < 2:
            raise DeconvUsageException(ERROR.NOT_ENOUGH_REPLICATES, celltype)
        groups.append(replicates.values[:, columns])
    return groups


def _welch_pvalues(
    groups: Sequence[np.ndarray],
    means: np.ndarray,
    first: np.ndarray,
    other: np.ndarray,
) -> np.ndarray:
    """Two-sided Welch p-values of group first[i] against other[i], per gene."""
    p_values = np.ones(first.shape[0])
    for a in np.unique(first):
        for b in np.unique(other[first == a]):
            rows = np.flatnonzero((first == a) & (other == b))
            result = stats.ttest_ind(
                groups[a][rows], groups[b][rows], axis=1, equal_var=False
            )
            p_values[rows] = result.pvalue
    undefined = ~np.isfinite(p_values)
    if undefined.any():
        # zero variance in both groups: separated means are certain, equal ones are not
        rows = np.flatnonzero(undefined)
        equal = means[rows, first[rows]] == means[rows, other[rows]]
        p_values[rows] = np.where(equal, 1.0, 0.0)
    return p_values


def bh_qvalues(p_values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Benjamini-Hochberg step-up q-values, in input order.

    Exceptions: DeconvUsageException.
    """
    p_values = np.asarray(p_values, dtype=float)
    if p_values.size == 0:
        return p_values.copy()
    if np.any(~np.isfinite(p_values)) or p_values.min() < 0 or p_values.max() > 1:
        raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, "p-values must lie in [0, 1]")
    return np.minimum(stats.false_discovery_control(p_values, method="bh"), 1.0)


def score_abbas(
    replicates: ExpressionMatrix,
    grouping: ReplicateGrouping,
    combine: PValueCombine = PValueCombine.MAX,
) -> list[MarkerScore]:
    """Score every gene by testing its top group against the runners-up.

    With three or more cell-types the test against the second and the third
    highest group are combined by combine. Sorted by ascending p-value.
    Exceptions: DeconvUsageException.
    """
    groups = _group_values(replicates, grouping)
    n_types = len(groups)
    if n_types < 2:
        raise DeconvUsageException(ERROR.NOT_ENOUGH_REPLICATES, "need two cell-types")
    means = np.column_stack([group.mean(axis=1) for group in groups])
    order = np.argsort(-means, axis=1, kind="stable")
    top = order[:, 0]
    p_values = _welch_pvalues(groups, means, top, order[:, 1])
    if n_types >= 3 and PValueCombine(combine) is PValueCombine.MAX:
        p_values = np.maximum(p_values, _welch_pvalues(groups, means, top, order[:, 2]))
    q_values = bh_qvalues(p_values)

    rows = np.arange(means.shape[0])
    highest = means[rows, top]
    second = means[rows, order[:, 1]]
    with np.errstate(divide="ignore", invalid="ignore"):
        folds = np.where(second > 0, highest / np.where(second > 0, second, 1.0), np.inf)
    scores = [
        MarkerScore(
            gene=replicates.row_labels[i],
            celltype=grouping.celltypes[top[i]],
            p_value=float(p_values[i]),
            q_value=float(q_values[i]),
            fold_ratio=float(folds[i]),
        )
        for i in np.argsort(p_values, kind="stable")
    ]
    _LOGGER.debug("Scored %s genes over %s cell-types", len(scores), n_types)
    return scores


def score_newman(
    replicates: ExpressionMatrix,
    grouping: ReplicateGrouping,
    q_cut: float = CONST.Q_CUT,
    combine: PValueCombine = PValueCombine.MAX,
) -> NewmanSelection:
    """Keep genes with q <= q_cut, grouped by cell-type, best fold ratio first.

    Exceptions: DeconvUsageException.
    """
    if not 0 <= q_cut <= 1:
        raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("q_cut", q_cut))
    markers: dict[str, list[MarkerScore]] = {celltype: [] for celltype in grouping.celltypes}
    for score in score_abbas(replicates, grouping, combine):
        if score.q_value <= q_cut:
            markers[score.celltype].append(score)
    for genes in markers.values():
        genes.sort(key=lambda score: -score.fold_ratio)
    without = tuple(celltype for celltype, genes in markers.items() if not genes)
    for celltype in without:
        _LOGGER.warning("No markers for %s at q <= %s", celltype, q_cut)
    return NewmanSelection(markers, without)


def condition_number(basis: np.ndarray) -> float:
    """Return the ratio of extreme singular values, or inf when singular."""
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[0] < basis.shape[1] or basis.size == 0:
        return float("inf")
    singular = linalg.svdvals(basis)
    if singular[0] == 0 or singular[-1] < CONST.SINGULAR_CUTOFF * singular[0]:
        return float("inf")
    return float(singular[0] / singular[-1])


def _per_type(
    markers: Sequence[MarkerScore] | Mapping[str, Sequence[MarkerScore]],
    celltypes: Sequence[str],
) -> dict[str, list[str]]:
    if isinstance(markers, Mapping):
        return {celltype: [s.gene for s in markers.get(celltype, ())] for celltype in celltypes}
    grouped: dict[str, list[str]] = {celltype: [] for celltype in celltypes}
    for score in markers:
        if score.celltype in grouped:
            grouped[score.celltype].append(score.gene)
    return grouped


def _global_order(
    markers: Sequence[MarkerScore] | Mapping[str, Sequence[MarkerScore]],
) -> list[str]:
    if isinstance(markers, Mapping):
        flat = [score for genes in markers.values() for score in genes]
        return [score.gene for score in sorted(flat, key=lambda score: score.p_value)]
    return [score.gene for score in markers]


def optimal_cut(
    markers: Sequence[MarkerScore] | Mapping[str, Sequence[MarkerScore]],
    reference: ExpressionMatrix,
    method: MarkerMethod,
    step_cap: int = CONST.STEP_CAP,
) -> BasisCut:
    """Grow nested bases from the markers and keep the best conditioned one.

    abbas adds one gene per step in p-value order, newman one gene per
    cell-type per step and balanced one gene for the cell-type whose basis
    column currently has the smallest norm.
    Exceptions: DeconvUsageException, DeconvDataException.
    """
    method = MarkerMethod(method)
    if method is MarkerMethod.NONE:
        raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("method", method.value))
    rows = {gene: index for index, gene in enumerate(reference.row_labels)}
    celltypes = reference.col_labels

    def known(genes: Sequence[str]) -> list[str]:
        return [gene for gene in genes if gene in rows]

    steps: list[tuple[str, ...]] = []
    exhausted: list[str] = []
    selected: list[str] = []
    if method is MarkerMethod.ABBAS:
        queue = known(_global_order(markers))
        steps = [(gene,) for gene in queue[:step_cap]]
    else:
        pending = {celltype: known(genes) for celltype, genes in _per_type(markers, celltypes).items()}
        while len(steps) < step_cap:
            active = [celltype for celltype in celltypes if pending[celltype]]
            if not active:
                break
            exhausted.extend(
                [ct for ct in celltypes if ct not in active and ct not in exhausted]
            )
            if method is MarkerMethod.NEWMAN:
                step = tuple(pending[celltype].pop(0) for celltype in active)
            else:
                basis = reference.values[[rows[gene] for gene in selected]]
                norms = np.linalg.norm(basis, axis=0) if selected else np.zeros(len(celltypes))
                # min keeps the first cell-type among equal norms
                weakest = min(active, key=lambda celltype: norms[celltypes.index(celltype)])
                step = (pending[weakest].pop(0),)
            selected.extend(step)
            steps.append(step)
    if len(steps) < 2:
        raise DeconvUsageException(ERROR.NOT_ENOUGH_POINTS, f"{len(steps)} marker steps")
    for celltype in exhausted:
        _LOGGER.warning("Cell-type %s ran out of markers", celltype)

    curve: list[float] = []
    prefix: list[int] = []
    for step in steps:
        prefix.extend(rows[gene] for gene in step)
        curve.append(condition_number(reference.values[prefix]))
    chosen = int(np.argmin(curve))
    if not np.isfinite(curve[chosen]):
        raise DeconvDataException(ERROR.EMPTY_BASIS, "every marker basis is singular")
    genes = tuple(gene for step in steps[: chosen + 1] for gene in step)
    _LOGGER.debug(
        "Marker cut (%s) keeps %s genes, condition %.4g", method.value, len(genes), curve[chosen]
    )
    return BasisCut(genes, tuple(curve), chosen, tuple(steps), tuple(exhausted))
