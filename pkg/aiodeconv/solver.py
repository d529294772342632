"""Constrained linear regression engine.

Every loss, regularizer and constraint mode ends up in one of three places:
the closed forms (OLS and ridge), scipy's active-set NNLS (squared loss with
explicit non-negativity only), or a cvxpy program solved by Clarabel.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
import logging
import time

import cvxpy as cp
import numpy as np
from scipy import linalg, optimize

from . import utils as UTILS
from .exceptions import (
    DeconvDegenerateException,
    DeconvEmptyBasisException,
    DeconvIllConditionedException,
    DeconvSolverException,
    DeconvUsageException,
)
from .helpers import const as CONST
from .helpers import errors as ERROR
from .helpers.const import Criterion, Enforcement, LossName, RegularizerName
from .model import ConcentrationMatrix, ExpressionMatrix

_LOGGER = logging.getLogger(__name__)

_ACCEPTED = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)


@dataclass(frozen=True)
class LossKind:
    """Loss function with its parameter (Huber M or epsilon margin)."""

    name: LossName
    param: float | None = None

    def __post_init__(self) -> None:
        """Fill the default parameter and validate it."""
        name = LossName(self.name)
        param = self.param
        if name is LossName.HUBER:
            param = CONST.DEFAULT_HUBER_M if param is None else float(param)
            if not param > 0:
                raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("huber_m", param))
        elif name is LossName.EPS:
            param = CONST.DEFAULT_EPSILON if param is None else float(param)
            if not param >= 0:
                raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("epsilon", param))
        else:
            param = None
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "param", param)

    @classmethod
    def squared_l2(cls) -> LossKind:
        """Return the squared loss."""
        return cls(LossName.L2)

    @classmethod
    def absolute_l1(cls) -> LossKind:
        """Return the absolute loss."""
        return cls(LossName.L1)

    @classmethod
    def huber(cls, m: float = CONST.DEFAULT_HUBER_M) -> LossKind:
        """Return the Huber loss with half-length M."""
        return cls(LossName.HUBER, m)

    @classmethod
    def eps_insensitive(cls, epsilon: float = CONST.DEFAULT_EPSILON) -> LossKind:
        """Return the epsilon-insensitive loss."""
        return cls(LossName.EPS, epsilon)

    @property
    def has_param(self) -> bool:
        """Return True for the parametrized losses."""
        return self.name in (LossName.HUBER, LossName.EPS)

    def with_param(self, value: float) -> LossKind:
        """Return the same loss with another parameter."""
        if not self.has_param:
            raise DeconvUsageException(ERROR.INVALID_PROBLEM, f"{self.name.value} has no parameter")
        return LossKind(self.name, value)

    def __str__(self) -> str:
        """Return a short label."""
        if self.name is LossName.HUBER:
            return f"huber(M={self.param:g})"
        if self.name is LossName.EPS:
            return f"eps(e={self.param:g})"
        return self.name.value


@dataclass(frozen=True)
class ConstraintMode:
    """Where non-negativity and sum-to-one are enforced."""

    nn: Enforcement = Enforcement.IMPLICIT
    sto: Enforcement = Enforcement.IMPLICIT

    def __post_init__(self) -> None:
        """Coerce enum values given as strings."""
        object.__setattr__(self, "nn", Enforcement(self.nn))
        object.__setattr__(self, "sto", Enforcement(self.sto))

    @property
    def explicit_nn(self) -> bool:
        """Return True when non-negativity enters the optimizer."""
        return self.nn is Enforcement.EXPLICIT

    @property
    def explicit_sto(self) -> bool:
        """Return True when sum-to-one enters the optimizer."""
        return self.sto is Enforcement.EXPLICIT


@dataclass(frozen=True)
class RegularizerKind:
    """Penalty on the coefficients.

    groups holds cell-type indices and is only read by the group lasso.
    """

    name: RegularizerName = RegularizerName.NONE
    lam: float = 0.0
    alpha: float = 0.5
    groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self) -> None:
        """Validate lambda and alpha."""
        name = RegularizerName(self.name)
        lam = float(self.lam)
        alpha = float(self.alpha)
        if not lam >= 0:
            raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("lambda", lam))
        if not 0.0 <= alpha <= 1.0:
            raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("alpha", alpha))
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(
            self, "groups", tuple(tuple(int(i) for i in group) for group in self.groups)
        )

    @property
    def active(self) -> bool:
        """Return True when a penalty is configured."""
        return self.name is not RegularizerName.NONE

    def with_lambda(self, value: float) -> RegularizerKind:
        """Return the same regularizer with another weight."""
        if not self.active:
            raise DeconvUsageException(ERROR.INVALID_PROBLEM, "no regularizer to search")
        return replace(self, lam=value)

    def __str__(self) -> str:
        """Return a short label."""
        if self.name is RegularizerName.ELASTIC:
            return f"elastic(a={self.alpha:g})"
        return self.name.value


@dataclass(frozen=True)
class RegressionProblem:
    """One sample's regression: design X (genes x cell-types), target y."""

    design: np.ndarray
    target: np.ndarray
    loss: LossKind = field(default_factory=LossKind.squared_l2)
    constraints: ConstraintMode = field(default_factory=ConstraintMode)
    regularizer: RegularizerKind = field(default_factory=RegularizerKind)

    def __post_init__(self) -> None:
        """Check shapes and the group partition."""
        design = np.array(self.design, dtype=float)
        target = np.array(self.target, dtype=float).reshape(-1)
        if design.ndim == 1:
            design = design.reshape(-1, 1)
        if design.ndim != 2 or design.shape[0] != target.shape[0] or design.shape[0] < 1:
            raise DeconvUsageException(ERROR.INVALID_PROBLEM, (design.shape, target.shape))
        if not (np.all(np.isfinite(design)) and np.all(np.isfinite(target))):
            raise DeconvUsageException(ERROR.INVALID_PROBLEM, "non-finite input")
        if self.regularizer.name is RegularizerName.GROUP:
            members = sorted(i for group in self.regularizer.groups for i in group)
            if members != list(range(design.shape[1])):
                raise DeconvUsageException(
                    ERROR.INVALID_SETTING_VALUE, ("groups", self.regularizer.groups)
                )
        design.setflags(write=False)
        target.setflags(write=False)
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "target", target)

    @property
    def size(self) -> tuple[int, int]:
        """Return (genes, cell-types)."""
        return self.design.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class Solution:
    """Solver output for one sample.

    raw_coefficients keeps the optimizer's point before implicit constraints.
    """

    coefficients: np.ndarray
    objective: float
    iterations: int
    converged: bool
    residual_rmsd: float
    status: str = ""
    raw_coefficients: np.ndarray | None = None


@dataclass(frozen=True)
class ParamGrid:
    """Parameter values tried by the grid search, ascending."""

    values: tuple[float, ...] = CONST.PARAM_GRID

    def __post_init__(self) -> None:
        """Require 15 values spaced by a factor of ten."""
        values = tuple(float(value) for value in self.values)
        ratios = np.array(values[1:]) / np.array(values[:-1])
        if len(values) != len(CONST.PARAM_GRID) or not np.allclose(ratios, 10.0):
            raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("grid", values))
        object.__setattr__(self, "values", values)

    def __iter__(self):  # type: ignore[no-untyped-def]
        """Iterate over the values."""
        return iter(self.values)

    def __len__(self) -> int:
        """Return the number of values."""
        return len(self.values)


@dataclass(frozen=True)
class DeconvolutionConfig:
    """Loss, constraint modes and regularizer applied to every sample."""

    loss: LossKind = field(default_factory=LossKind.squared_l2)
    constraints: ConstraintMode = field(default_factory=ConstraintMode)
    regularizer: RegularizerKind = field(default_factory=RegularizerKind)
    max_iters: int = CONST.MAX_ITERS

    def problem(self, design: np.ndarray, target: np.ndarray) -> RegressionProblem:
        """Build the regression problem for one sample."""
        return RegressionProblem(
            design, target, self.loss, self.constraints, self.regularizer
        )

    def with_parameter(self, target: str, value: float) -> DeconvolutionConfig:
        """Return a copy with the loss parameter or lambda replaced."""
        if target == "loss":
            return replace(self, loss=self.loss.with_param(value))
        return replace(self, regularizer=self.regularizer.with_lambda(value))

    @property
    def label(self) -> str:
        """Return a human readable description."""
        return (
            f"{self.loss}|nn={self.constraints.nn.value}"
            f"|sto={self.constraints.sto.value}|reg={self.regularizer}"
        )


@dataclass(frozen=True)
class GridCriterion:
    """Selection rule for grid_search_param.

    truth is the true concentration column, required for OracleMad.
    """

    kind: Criterion
    truth: np.ndarray | None = None

    @classmethod
    def oracle_mad(cls, truth: np.ndarray) -> GridCriterion:
        """Score by mAD against known concentrations."""
        return cls(Criterion.ORACLE_MAD, np.asarray(truth, dtype=float))

    @classmethod
    def residual_rmsd(cls) -> GridCriterion:
        """Score by RMSD between m and G c."""
        return cls(Criterion.RESIDUAL_RMSD)

    @classmethod
    def lcurve(cls) -> GridCriterion:
        """Pick the corner of the residual/penalty curve."""
        return cls(Criterion.LCURVE)


@dataclass(frozen=True)
class GridSearchResult:
    """Best grid value, all scores and the solution at the best value."""

    best: float
    scores: tuple[float, ...]
    grid: tuple[float, ...]
    target: str
    solution: Solution


@dataclass
class AnlsTrace:
    """Objective after each half-step of the alternating solve."""

    objectives: list[float] = field(default_factory=list)
    ridge_steps: list[int] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


@dataclass(frozen=True)
class AnlsResult:
    """Estimated reference, concentrations and the trace."""

    reference: np.ndarray
    concentrations: np.ndarray
    trace: AnlsTrace


def loss_value(kind: LossKind, r: float | np.ndarray) -> float | np.ndarray:
    """Return the loss of a residual (element-wise for arrays)."""
    arr = np.asarray(r, dtype=float)
    absolute = np.abs(arr)
    if kind.name is LossName.L2:
        value = arr**2
    elif kind.name is LossName.L1:
        value = absolute
    elif kind.name is LossName.HUBER:
        m = float(kind.param)  # type: ignore[arg-type]
        value = np.where(absolute <= m, arr**2, m * (2.0 * absolute - m))
    else:
        value = np.maximum(0.0, absolute - float(kind.param))  # type: ignore[arg-type]
    if np.ndim(value) == 0:
        return float(value)
    return value


def regularizer_value(kind: RegularizerKind, w: np.ndarray) -> float:
    """Return R(w) without the lambda weight."""
    w = np.asarray(w, dtype=float)
    if kind.name is RegularizerName.L2:
        return float(w @ w)
    if kind.name is RegularizerName.L1:
        return float(np.abs(w).sum())
    if kind.name is RegularizerName.ELASTIC:
        return float(kind.alpha * np.abs(w).sum() + (1.0 - kind.alpha) * (w @ w))
    if kind.name is RegularizerName.GROUP:
        return float(sum(np.linalg.norm(w[list(group)]) for group in kind.groups))
    return 0.0


def objective_value(problem: RegressionProblem, w: np.ndarray) -> float:
    """Return sum of losses of y - Xw plus lambda R(w)."""
    w = np.asarray(w, dtype=float)
    residual = problem.target - problem.design @ w
    total = float(np.sum(loss_value(problem.loss, residual)))
    if problem.regularizer.active:
        total += problem.regularizer.lam * regularizer_value(problem.regularizer, w)
    return total


def residual_rmsd(problem: RegressionProblem, w: np.ndarray) -> float:
    """Return the RMSD between y and Xw."""
    residual = problem.target - problem.design @ np.asarray(w, dtype=float)
    return float(np.sqrt(np.mean(residual**2)))


def svr_problem(
    design: np.ndarray,
    target: np.ndarray,
    epsilon: float,
    c_param: float,
    constraints: ConstraintMode | None = None,
) -> RegressionProblem:
    """Return the linear epsilon-SVR primal (no bias) in loss form."""
    if not c_param > 0:
        raise DeconvUsageException(ERROR.INVALID_SETTING_VALUE, ("C", c_param))
    return RegressionProblem(
        design,
        target,
        LossKind.eps_insensitive(epsilon),
        constraints or ConstraintMode(),
        RegularizerKind(RegularizerName.L2, 1.0 / (2.0 * c_param)),
    )


def _finish(
    problem: RegressionProblem,
    w: np.ndarray,
    iterations: int = 1,
    converged: bool = True,
    status: str = cp.OPTIMAL,
) -> Solution:
    w = np.array(w, dtype=float)
    w.setflags(write=False)
    return Solution(
        coefficients=w,
        objective=objective_value(problem, w),
        iterations=iterations,
        converged=converged,
        residual_rmsd=residual_rmsd(problem, w),
        status=status,
        raw_coefficients=w,
    )


def _normal_equations(problem: RegressionProblem, lam: float) -> np.ndarray:
    design = problem.design
    n_types = design.shape[1]
    singular = linalg.svdvals(design)
    smin = singular[-1] if design.shape[0] >= n_types else 0.0
    condition = float(singular[0] / smin) ** 2 if smin > 0 else float("inf")
    if lam == 0 and condition > 1.0 / np.finfo(float).eps:
        raise DeconvIllConditionedException(
            ERROR.ILL_CONDITIONED, f"cond(XtX)={condition:.3g}", condition=condition
        )
    gram = design.T @ design + lam * np.eye(n_types)
    return linalg.solve(gram, design.T @ problem.target, assume_a="pos")


def _require_squared(problem: RegressionProblem, name: str) -> None:
    if problem.loss.name is not LossName.L2:
        raise DeconvUsageException(ERROR.INVALID_PROBLEM, f"{name} needs the squared loss")
    if problem.constraints.explicit_nn or problem.constraints.explicit_sto:
        raise DeconvUsageException(ERROR.INVALID_PROBLEM, f"{name} takes no constraints")


def solve_ols(problem: RegressionProblem) -> Solution:
    """Solve the normal equations (XtX) w = Xt y.

    Exceptions: DeconvUsageException, DeconvIllConditionedException.
    """
    _require_squared(problem, "ols")
    if problem.regularizer.active:
        raise DeconvUsageException(ERROR.INVALID_PROBLEM, "ols takes no regularizer")
    return _finish(problem, _normal_equations(problem, 0.0))


def solve_ridge(problem: RegressionProblem) -> Solution:
    """Solve (XtX + lambda I) w = Xt y.

    Exceptions: DeconvUsageException.
    """
    _require_squared(problem, "ridge")
    if problem.regularizer.name is not RegularizerName.L2:
        raise DeconvUsageException(ERROR.INVALID_PROBLEM, "ridge needs the l2 regularizer")
    return _finish(problem, _normal_equations(problem, problem.regularizer.lam))


def _solve_nnls(problem: RegressionProblem, max_iters: int) -> Solution:
    design = problem.design
    target = problem.target
    lam = problem.regularizer.lam if problem.regularizer.active else 0.0
    if lam > 0:
        n_types = design.shape[1]
        design = np.vstack([design, np.sqrt(lam) * np.eye(n_types)])
        target = np.concatenate([target, np.zeros(n_types)])
    try:
        w, _ = optimize.nnls(design, target, maxiter=max_iters)
    except RuntimeError as ex:
        raise DeconvSolverException(ERROR.NOT_CONVERGED, str(ex), iterations=max_iters) from ex
    return _finish(problem, w)


def _loss_expression(kind: LossKind, design, target, scale: float):  # type: ignore[no-untyped-def]
    if kind.name is LossName.L2:
        return cp.sum_squares(target - design), []
    if kind.name is LossName.L1:
        return cp.norm1(target - design), []
    if kind.name is LossName.EPS:
        margin = float(kind.param) / scale  # type: ignore[arg-type]
        return cp.sum(cp.pos(cp.abs(target - design) - margin)), []
    # Huber as a QP: z carries the quadratic part, r - s the linear tail.
    half_length = float(kind.param) / scale  # type: ignore[arg-type]
    n_genes = target.shape[0]
    quad = cp.Variable(n_genes)
    over = cp.Variable(n_genes, nonneg=True)
    under = cp.Variable(n_genes, nonneg=True)
    expr = cp.sum_squares(quad) + 2.0 * half_length * cp.sum(over + under)
    return expr, [design - target - quad == over - under]


def _penalty_expression(kind: RegularizerKind, w: cp.Variable):  # type: ignore[no-untyped-def]
    if kind.name is RegularizerName.L2:
        return cp.sum_squares(w)
    if kind.name is RegularizerName.L1:
        return cp.norm1(w)
    if kind.name is RegularizerName.ELASTIC:
        return kind.alpha * cp.norm1(w) + (1.0 - kind.alpha) * cp.sum_squares(w)
    return cp.sum([cp.norm(w[list(group)], 2) for group in kind.groups])


def _solve_convex(problem: RegressionProblem, max_iters: int) -> Solution:
    n_types = problem.design.shape[1]
    # Work on y / s and X / s; loss parameters and lambda follow the same scale.
    scale = float(np.max(np.abs(problem.target))) or 1.0
    design = problem.design / scale
    target = problem.target / scale
    power = 2.0 if problem.loss.name in (LossName.L2, LossName.HUBER) else 1.0

    w = cp.Variable(n_types)
    loss, constraints = _loss_expression(problem.loss, design @ w, target, scale)
    objective = loss
    if problem.regularizer.active and problem.regularizer.lam > 0:
        weight = problem.regularizer.lam / scale**power
        objective = objective + weight * _penalty_expression(problem.regularizer, w)
    if problem.constraints.explicit_nn:
        constraints.append(w >= 0)
    if problem.constraints.explicit_sto:
        constraints.append(cp.sum(w) == 1)

    at_zero = objective_value(problem, np.zeros(n_types)) / scale**power
    normalizer = at_zero if at_zero > 0 else 1.0
    program = cp.Problem(cp.Minimize(objective / normalizer), constraints)
    try:
        program.solve(solver=cp.CLARABEL, max_iter=max_iters, **CONST.CLARABEL_TOLERANCES)
    except cp.error.SolverError as ex:
        raise DeconvSolverException(
            ERROR.SOLVER_FAILED, str(ex), best=w.value, iterations=max_iters
        ) from ex

    stats = program.solver_stats
    iterations = int(stats.num_iters) if stats and stats.num_iters is not None else 0
    if program.status not in _ACCEPTED or w.value is None:
        raise DeconvSolverException(
            ERROR.NOT_CONVERGED, program.status, best=w.value, iterations=iterations
        )
    converged = program.status == cp.OPTIMAL
    if not converged:
        _LOGGER.warning("Solver returned %s for %s", program.status, problem.loss)
    return _finish(problem, w.value, iterations, converged, program.status)


def _polish(problem: RegressionProblem, solution: Solution) -> Solution:
    w = np.array(solution.coefficients, dtype=float)
    if problem.constraints.explicit_nn:
        if w.min() < -CONST.FEASIBILITY_TOL:
            _LOGGER.debug("Clipping coefficient %s to zero", w.min())
        w = np.maximum(w, 0.0)
    if problem.constraints.explicit_sto:
        total = w.sum()
        if total > 0:
            w = w / total
    return _finish(
        problem, w, solution.iterations, solution.converged, solution.status
    )


def solve_constrained(
    problem: RegressionProblem, max_iters: int = CONST.MAX_ITERS
) -> Solution:
    """Solve one regression with its explicit constraints.

    Implicit constraints are left to enforce_implicit.
    Exceptions: DeconvSolverException, DeconvIllConditionedException.
    """
    start = time.perf_counter()
    modes = problem.constraints
    regularizer = problem.regularizer
    squared = problem.loss.name is LossName.L2
    plain_penalty = regularizer.name in (RegularizerName.NONE, RegularizerName.L2)
    if squared and plain_penalty and not modes.explicit_sto:
        if modes.explicit_nn:
            solution = _solve_nnls(problem, max_iters)
        elif regularizer.active:
            solution = solve_ridge(problem)
        else:
            solution = solve_ols(problem)
    else:
        solution = _polish(problem, _solve_convex(problem, max_iters))
    _LOGGER.debug(
        "Solved %s (nn=%s, sto=%s, reg=%s) in %.4fs",
        problem.loss,
        modes.nn.value,
        modes.sto.value,
        regularizer,
        time.perf_counter() - start,
    )
    return solution


def enforce_implicit(c: np.ndarray, mode: ConstraintMode) -> np.ndarray:
    """Clamp negatives, then divide by the sum, for implicit constraints.

    Exceptions: DeconvDegenerateException.
    """
    c = np.array(c, dtype=float)
    if not mode.explicit_nn:
        c = np.maximum(c, 0.0)
    if not mode.explicit_sto or not mode.explicit_nn:
        total = c.sum()
        if not total > 0:
            raise DeconvDegenerateException(ERROR.DEGENERATE_SOLUTION, c.tolist())
        c = c / total
    return c


def _design_of(reference: ExpressionMatrix | np.ndarray) -> np.ndarray:
    if isinstance(reference, ExpressionMatrix):
        return reference.values
    return np.asarray(reference, dtype=float)


def deconvolve_sample(
    reference: ExpressionMatrix | np.ndarray,
    mixture: np.ndarray,
    config: DeconvolutionConfig,
) -> Solution:
    """Deconvolve one mixture column; the result always lies on the simplex.

    Exceptions: DeconvSolverException and subclasses.
    """
    problem = config.problem(_design_of(reference), mixture)
    raw = solve_constrained(problem, config.max_iters)
    c = enforce_implicit(raw.coefficients, config.constraints)
    c.setflags(write=False)
    return Solution(
        coefficients=c,
        objective=objective_value(problem, c),
        iterations=raw.iterations,
        converged=raw.converged,
        residual_rmsd=residual_rmsd(problem, c),
        status=raw.status,
        raw_coefficients=raw.coefficients,
    )


def _grid_target(config: DeconvolutionConfig, target: str | None) -> str:
    if target is None:
        target = "loss" if config.loss.has_param else "lambda"
    if target == "loss" and config.loss.has_param:
        return target
    if target == "lambda" and config.regularizer.active:
        return target
    raise DeconvUsageException(
        ERROR.INVALID_PROBLEM, f"nothing to search for {config.label} ({target})"
    )


def grid_search_param(
    reference: ExpressionMatrix | np.ndarray,
    mixture: np.ndarray,
    config: DeconvolutionConfig,
    criterion: GridCriterion,
    grid: ParamGrid | None = None,
    target: str | None = None,
) -> GridSearchResult:
    """Try every grid value and keep the best one.

    Ties go to the smaller value. Failed solves score +inf.
    Exceptions: DeconvUsageException, DeconvSolverException.
    """
    grid = grid or ParamGrid()
    target = _grid_target(config, target)
    if criterion.kind is Criterion.ORACLE_MAD and criterion.truth is None:
        raise DeconvUsageException(ERROR.MISSING_INPUT, "truth")
    if criterion.kind is Criterion.LCURVE and target != "lambda":
        raise DeconvUsageException(ERROR.INVALID_PROBLEM, "lcurve searches lambda only")

    design = _design_of(reference)
    solutions: list[Solution | None] = []
    scores: list[float] = []
    curve: list[tuple[float, float]] = []
    for value in grid:
        candidate = config.with_parameter(target, value)
        try:
            solution = deconvolve_sample(design, mixture, candidate)
        except DeconvSolverException as err:
            _LOGGER.debug("Grid value %s failed: %s", value, err)
            solutions.append(None)
            scores.append(float("inf"))
            curve.append((float("nan"), float("nan")))
            continue
        solutions.append(solution)
        if criterion.kind is Criterion.ORACLE_MAD:
            truth = np.asarray(criterion.truth, dtype=float)
            truth = truth / truth.sum()
            scores.append(float(np.mean(np.abs(100.0 * (solution.coefficients - truth)))))
        else:
            scores.append(solution.residual_rmsd)
        raw = solution.raw_coefficients
        residual = np.linalg.norm(np.asarray(mixture, float) - design @ raw)
        penalty = regularizer_value(candidate.regularizer, raw) if target == "lambda" else 0.0
        curve.append((residual, penalty))

    if criterion.kind is Criterion.LCURVE:
        scores = _lcurve_scores(curve, scores)
    scores = [score if np.isfinite(score) else float("inf") for score in scores]

    best_index = -1
    best_score = float("inf")
    for index, score in enumerate(scores):
        if score < best_score:
            best_index, best_score = index, score
    if best_index < 0:
        raise DeconvSolverException(ERROR.SOLVER_FAILED, f"every grid value failed for {config.label}")
    _LOGGER.debug("Grid search for %s picked %s=%s", config.label, target, grid.values[best_index])
    return GridSearchResult(
        best=grid.values[best_index],
        scores=tuple(scores),
        grid=grid.values,
        target=target,
        solution=solutions[best_index],  # type: ignore[arg-type]
    )


def _lcurve_scores(
    curve: Sequence[tuple[float, float]], fallback: Sequence[float]
) -> list[float]:
    """Negative chord distance on the log-log residual/penalty curve."""
    finite = [
        index
        for index, (residual, penalty) in enumerate(curve)
        if np.isfinite(fallback[index]) and np.isfinite(residual)
    ]
    scores = [float("inf")] * len(curve)
    if not finite:
        return scores
    tiny = np.finfo(float).tiny
    x = np.log10(np.maximum([curve[i][0] for i in finite], tiny))
    y = np.log10(np.maximum([curve[i][1] for i in finite], tiny))
    distances = UTILS.chord_distances(x, y, unit=True) if len(finite) > 2 else np.zeros(len(finite))
    for index, distance in zip(finite, distances):
        scores[index] = -float(distance)
    return scores


def _nonneg_fit(
    design: np.ndarray,
    target: np.ndarray,
    loss: LossKind,
    ridge: float,
    max_iters: int,
) -> np.ndarray:
    if loss.name is LossName.L2:
        if ridge > 0:
            n_types = design.shape[1]
            design = np.vstack([design, np.sqrt(ridge) * np.eye(n_types)])
            target = np.concatenate([target, np.zeros(n_types)])
        try:
            w, _ = optimize.nnls(design, target, maxiter=max_iters)
        except RuntimeError as ex:
            raise DeconvSolverException(ERROR.NOT_CONVERGED, str(ex)) from ex
        return w
    regularizer = (
        RegularizerKind(RegularizerName.L2, ridge) if ridge > 0 else RegularizerKind()
    )
    problem = RegressionProblem(
        design, target, loss, ConstraintMode(nn=Enforcement.EXPLICIT), regularizer
    )
    return np.array(solve_constrained(problem, max_iters).coefficients)


def full_deconvolve_anls(
    mixture: ExpressionMatrix | np.ndarray,
    init_reference: np.ndarray | None = None,
    init_concentrations: np.ndarray | None = None,
    loss: LossKind | None = None,
    max_iters: int = CONST.MAX_ITERS,
    tol: float = CONST.OBJECTIVE_TOL,
) -> AnlsResult:
    """Factor M into non-negative G and C by alternating block solves.

    C is updated column by column, G row by row. A half-step that would raise
    the objective is discarded, so the trace never increases.
    Exceptions: DeconvUsageException, DeconvSolverException.
    """
    loss = loss or LossKind.squared_l2()
    data = _design_of(mixture)
    n_genes, n_samples = data.shape
    if init_reference is not None:
        reference = np.array(init_reference, dtype=float)
        n_types = reference.shape[1]
        concentrations = np.zeros((n_types, n_samples))
        start_with_c = True
    elif init_concentrations is not None:
        concentrations = np.array(init_concentrations, dtype=float)
        n_types = concentrations.shape[0]
        reference = np.zeros((n_genes, n_types))
        start_with_c = False
    else:
        raise DeconvUsageException(ERROR.MISSING_INPUT, "init reference or concentrations")
    if n_types > n_samples:
        raise DeconvUsageException(
            ERROR.INVALID_PROBLEM, f"{n_types} cell-types but {n_samples} samples"
        )

    def objective(ref: np.ndarray, conc: np.ndarray) -> float:
        return float(np.sum(loss_value(loss, data - ref @ conc)))

    def c_step(ref: np.ndarray) -> np.ndarray:
        return np.column_stack(
            [_nonneg_fit(ref, data[:, j], loss, 0.0, max_iters) for j in range(n_samples)]
        )

    def g_step(conc: np.ndarray, half_step: int) -> np.ndarray:
        ridge = 0.0
        if np.linalg.matrix_rank(conc) < n_types:
            ridge = CONST.RIDGE_JITTER
            trace.ridge_steps.append(half_step)
            _LOGGER.debug("Rank deficient C at half-step %s, adding ridge", half_step)
        return np.vstack(
            [_nonneg_fit(conc.T, data[i, :], loss, ridge, max_iters) for i in range(n_genes)]
        )

    trace = AnlsTrace()
    baseline = float(np.sum(loss_value(loss, data)))
    previous = float("inf")
    for iteration in range(1, max_iters + 1):
        for step in (0, 1) if start_with_c else (1, 0):
            half_step = len(trace.objectives)
            if step == 0:
                candidate = c_step(reference)
                value = objective(reference, candidate)
                accept = half_step == 0 or value <= trace.objectives[-1]
                if accept:
                    concentrations = candidate
            else:
                candidate = g_step(concentrations, half_step)
                value = objective(candidate, concentrations)
                accept = half_step == 0 or value <= trace.objectives[-1]
                if accept:
                    reference = candidate
            trace.objectives.append(value if accept else trace.objectives[-1])
        trace.iterations = iteration
        current = trace.objectives[-1]
        settled = np.isfinite(previous) and previous - current <= tol * previous
        if settled or current <= tol * tol * baseline:
            trace.converged = True
            break
        previous = current

    if not trace.converged:
        _LOGGER.warning("ANLS stopped after %s iterations", trace.iterations)
    return AnlsResult(reference, concentrations, trace)


def deconvolve_matrix(
    reference: ExpressionMatrix,
    mixture: ExpressionMatrix,
    config: DeconvolutionConfig,
    masks: Mapping[str, np.ndarray] | None = None,
) -> ConcentrationMatrix:
    """Deconvolve every mixture column, optionally on a per-sample gene mask.

    Exceptions: DeconvSolverException and subclasses, DeconvEmptyBasisException.
    """
    columns = {}
    for index, sample in enumerate(mixture.col_labels):
        design = reference.values
        target = mixture.values[:, index]
        if masks is not None:
            keep = np.asarray(masks[sample], dtype=bool)
            if not keep.any():
                raise DeconvEmptyBasisException(ERROR.EMPTY_BASIS, sample)
            design = design[keep]
            target = target[keep]
        columns[sample] = deconvolve_sample(design, target, config).coefficients
    return ConcentrationMatrix.from_columns(reference.col_labels, columns)
