"""
Conic program module for PVBat-Sizer.

This module provides a small modeling layer for second-order cone programs:
- Variables with bounds and a linear objective
- Sparse linear rows (=, <=, >=), added one at a time or in vectorized blocks
- Rotated second-order cones u·v >= w², u, v >= 0 with affine w
- Solving through cvxpy with the Clarabel interior-point solver
- An independent feasibility checker and a plain-text dump for debugging
"""

import time
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Union

import numpy as np
import scipy.sparse as sp
import cvxpy as cp

logger = logging.getLogger(__name__)

DEFAULT_TOL_FEAS = 1e-8
DEFAULT_TOL_GAP = 1e-8
DEFAULT_MAX_ITER = 200

ScalarOrArray = Union[float, np.ndarray]


class ProgramError(ValueError):
    """Raised for malformed program data."""


class Sense(str, Enum):
    EQ = "="
    LE = "<="
    GE = ">="


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"
    ITERATION_LIMIT = "IterationLimit"


_CVXPY_STATUS = {
    cp.OPTIMAL: SolveStatus.OPTIMAL,
    cp.INFEASIBLE: SolveStatus.INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: SolveStatus.INFEASIBLE,
    cp.UNBOUNDED: SolveStatus.UNBOUNDED,
    cp.UNBOUNDED_INACCURATE: SolveStatus.UNBOUNDED,
    cp.USER_LIMIT: SolveStatus.ITERATION_LIMIT,
}


@dataclass(frozen=True)
class Affine:
    """Affine expression ``Σ coeff·x[index] + constant``."""
    terms: Dict[int, float] = field(default_factory=dict)
    constant: float = 0.0


class _LinearBlock(NamedTuple):
    cols: np.ndarray
    vals: np.ndarray
    sense: Sense
    rhs: np.ndarray


class _ConeBlock(NamedTuple):
    u: np.ndarray
    v: np.ndarray
    w_cols: np.ndarray
    w_vals: np.ndarray
    w_const: np.ndarray


class CompiledProgram(NamedTuple):
    cost: np.ndarray
    constant: float
    lower: np.ndarray
    upper: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    a_le: sp.csr_matrix
    b_le: np.ndarray
    cone_u: np.ndarray
    cone_v: np.ndarray
    cone_w: sp.csr_matrix
    cone_w0: np.ndarray


@dataclass
class ConicSolution:
    status: SolveStatus
    objective_value: float
    var_values: np.ndarray
    solve_time_s: float
    iterations: int
    message: str = ""
    feasibility: Optional["FeasibilityReport"] = None

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass
class FeasibilityReport:
    max_linear: float
    max_bound: float
    max_cone: float
    tol: float

    @property
    def ok(self) -> bool:
        return max(self.max_linear, self.max_bound, self.max_cone) <= self.tol


def _as_2d(values, rows: int, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim < 2:
        arr = arr.reshape(rows, -1) if rows else arr.reshape(0, 1)
    return arr


class ConicProgram:
    """
    Linear objective over bounded variables, sparse linear rows and rotated cones.

    Construction is append-only; variable, row and cone ids are stable.
    """

    def __init__(self, name: str = "program"):
        self.name = name
        self.objective_constant = 0.0
        self._lower: List[np.ndarray] = []
        self._upper: List[np.ndarray] = []
        self._cost: List[np.ndarray] = []
        self._num_vars = 0
        self._linear: List[_LinearBlock] = []
        self._num_rows = 0
        self._cones: List[_ConeBlock] = []
        self._num_cones = 0
        self._nonneg: List[np.ndarray] = []
        self._compiled: Optional[CompiledProgram] = None

    @property
    def num_vars(self) -> int:
        return self._num_vars

    @property
    def num_rows(self) -> int:
        return self._num_rows

    @property
    def num_cones(self) -> int:
        return self._num_cones

    def add_variables(self, count: int, lower: ScalarOrArray = 0.0, upper: ScalarOrArray = np.inf,
                      cost: ScalarOrArray = 0.0) -> np.ndarray:
        """
        Add ``count`` variables.

        Args:
            count (int): Number of variables.
            lower: Lower bound(s), may be ``-inf``.
            upper: Upper bound(s), may be ``inf``.
            cost: Objective coefficient(s).

        Returns:
            np.ndarray: The new variable indices.

        Raises:
            ProgramError: On NaN data or a lower bound above its upper bound.
        """
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (count,)).copy()
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (count,)).copy()
        cost = np.broadcast_to(np.asarray(cost, dtype=float), (count,)).copy()
        if np.isnan(lower).any() or np.isnan(upper).any() or not np.isfinite(cost).all():
            raise ProgramError("variable data must not contain NaN or infinite costs")
        if np.any(lower > upper):
            bad = int(np.flatnonzero(lower > upper)[0])
            raise ProgramError(f"lower bound {lower[bad]} exceeds upper bound {upper[bad]}")

        start = self._num_vars
        self._lower.append(lower)
        self._upper.append(upper)
        self._cost.append(cost)
        self._num_vars += count
        self._compiled = None
        return np.arange(start, start + count)

    def add_variable(self, lower: float = 0.0, upper: float = np.inf, cost: float = 0.0) -> int:
        """Add one variable and return its index."""
        return int(self.add_variables(1, lower, upper, cost)[0])

    def add_objective_terms(self, index: ScalarOrArray, coeff: ScalarOrArray) -> None:
        """Add ``coeff`` to the objective coefficients of ``index``."""
        index = np.atleast_1d(np.asarray(index, dtype=int))
        self._check_indices(index)
        coeff = np.broadcast_to(np.asarray(coeff, dtype=float), index.shape)
        cost = self._flat(self._cost)
        np.add.at(cost, index, coeff)
        self._cost = [cost]
        self._compiled = None

    def add_linear_rows(self, cols, vals, sense: Union[Sense, str], rhs) -> np.ndarray:
        """
        Add ``m`` linear rows with ``k`` terms each.

        Args:
            cols: ``(m, k)`` variable indices.
            vals: ``(m, k)`` coefficients.
            sense: Relation of every row.
            rhs: ``(m,)`` right-hand sides.

        Returns:
            np.ndarray: The new row ids.
        """
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        m = rhs.size
        cols = _as_2d(cols, m, int)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), cols.shape).copy()
        if cols.shape[0] != m:
            raise ProgramError(f"{cols.shape[0]} rows of terms for {m} right-hand sides")
        self._check_indices(cols)
        if not (np.isfinite(vals).all() and np.isfinite(rhs).all()):
            raise ProgramError("linear rows must have finite coefficients")

        start = self._num_rows
        self._linear.append(_LinearBlock(cols, vals, Sense(sense), rhs))
        self._num_rows += m
        self._compiled = None
        return np.arange(start, start + m)

    def add_linear(self, terms: Dict[int, float], sense: Union[Sense, str], rhs: float) -> int:
        """Add one linear row ``Σ coeff·x[index] (sense) rhs``."""
        cols = np.array([list(terms.keys())], dtype=int).reshape(1, -1)
        vals = np.array([list(terms.values())], dtype=float).reshape(1, -1)
        return int(self.add_linear_rows(cols, vals, sense, [rhs])[0])

    def add_rsoc_rows(self, u, v, w_cols, w_vals, w_const: ScalarOrArray = 0.0) -> np.ndarray:
        """
        Add ``m`` rotated cones ``x[u]·x[v] >= (Σ w_vals·x[w_cols] + w_const)²``.

        Lower bounds of ``u`` and ``v`` are tightened to 0.

        Returns:
            np.ndarray: The new cone ids.
        """
        u = np.atleast_1d(np.asarray(u, dtype=int))
        v = np.atleast_1d(np.asarray(v, dtype=int))
        m = u.size
        if v.size != m:
            raise ProgramError("u and v must have the same length")
        w_cols = _as_2d(w_cols, m, int)
        w_vals = np.broadcast_to(np.asarray(w_vals, dtype=float), w_cols.shape).copy()
        w_const = np.broadcast_to(np.asarray(w_const, dtype=float), (m,)).copy()
        self._check_indices(u)
        self._check_indices(v)
        self._check_indices(w_cols)
        if not (np.isfinite(w_vals).all() and np.isfinite(w_const).all()):
            raise ProgramError("cone data must be finite")

        self._nonneg.append(np.concatenate([u, v]))
        start = self._num_cones
        self._cones.append(_ConeBlock(u, v, w_cols, w_vals, w_const))
        self._num_cones += m
        self._compiled = None
        return np.arange(start, start + m)

    def add_rsoc(self, u: int, v: int, w: Affine) -> int:
        """Add one rotated cone ``x[u]·x[v] >= w²``."""
        if w.terms:
            cols = np.array([list(w.terms.keys())], dtype=int)
            vals = np.array([list(w.terms.values())], dtype=float)
        else:
            cols = np.array([[u]], dtype=int)
            vals = np.zeros((1, 1))
        return int(self.add_rsoc_rows([u], [v], cols, vals, [w.constant])[0])

    def _check_indices(self, index: np.ndarray) -> None:
        if index.size and (index.min() < 0 or index.max() >= self._num_vars):
            raise ProgramError(f"variable index out of range [0, {self._num_vars})")

    @staticmethod
    def _flat(chunks: List[np.ndarray]) -> np.ndarray:
        return np.concatenate(chunks) if chunks else np.zeros(0)

    @property
    def lower(self) -> np.ndarray:
        return self.compile().lower

    @property
    def upper(self) -> np.ndarray:
        return self.compile().upper

    @property
    def cost(self) -> np.ndarray:
        return self.compile().cost

    def compile(self) -> CompiledProgram:
        """Assemble the sparse matrices; cached until the program changes."""
        if self._compiled is not None:
            return self._compiled

        n = self._num_vars
        lower = self._flat(self._lower)
        upper = self._flat(self._upper)
        for index in self._nonneg:
            lower[index] = np.maximum(lower[index], 0.0)

        eq, le = _RowCollector(n), _RowCollector(n)
        for block in self._linear:
            if block.sense is Sense.EQ:
                eq.add(block.cols, block.vals, block.rhs)
            elif block.sense is Sense.LE:
                le.add(block.cols, block.vals, block.rhs)
            else:
                le.add(block.cols, -block.vals, -block.rhs)
        a_eq, b_eq = eq.build()
        a_le, b_le = le.build()

        cones = _RowCollector(n)
        for block in self._cones:
            cones.add(block.w_cols, block.w_vals, block.w_const)
        cone_w, cone_w0 = cones.build()
        cone_u = self._flat([b.u for b in self._cones]).astype(int)
        cone_v = self._flat([b.v for b in self._cones]).astype(int)

        self._compiled = CompiledProgram(
            cost=self._flat(self._cost), constant=float(self.objective_constant),
            lower=lower, upper=upper, a_eq=a_eq, b_eq=b_eq, a_le=a_le, b_le=b_le,
            cone_u=cone_u, cone_v=cone_v, cone_w=cone_w, cone_w0=cone_w0,
        )
        return self._compiled


class _RowCollector:
    """Accumulates (cols, vals, rhs) blocks into one CSR matrix."""

    def __init__(self, num_vars: int):
        self.num_vars = num_vars
        self.rows, self.cols, self.vals, self.rhs = [], [], [], []
        self.count = 0

    def add(self, cols: np.ndarray, vals: np.ndarray, rhs: np.ndarray) -> None:
        m, k = cols.shape
        self.rows.append(np.repeat(np.arange(self.count, self.count + m), k))
        self.cols.append(cols.ravel())
        self.vals.append(vals.ravel())
        self.rhs.append(rhs)
        self.count += m

    def build(self):
        if not self.count:
            return sp.csr_matrix((0, self.num_vars)), np.zeros(0)
        matrix = sp.csr_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(self.count, self.num_vars),
        )
        matrix.sum_duplicates()
        return matrix, np.concatenate(self.rhs)


def objective_value(prog: ConicProgram, x: np.ndarray) -> float:
    """Objective ``cᵀx + constant`` recomputed from raw data."""
    compiled = prog.compile()
    return float(compiled.cost @ x + compiled.constant)


def check_feasibility(prog: ConicProgram, x: np.ndarray, tol: float) -> FeasibilityReport:
    """
    Re-evaluate every bound, row and cone of ``prog`` at ``x``.

    Residuals are relative: linear rows to ``max(1, |rhs|, ‖row‖·‖x‖∞)``, bounds to
    ``max(1, |bound|)``, cones (in the form ``‖(2w, u - v)‖ <= u + v``) to ``max(1, u + v)``.
    """
    compiled = prog.compile()
    x = np.asarray(x, dtype=float)
    x_scale = max(1.0, float(np.max(np.abs(x)))) if x.size else 1.0

    def row_residual(matrix: sp.csr_matrix, rhs: np.ndarray, equality: bool) -> float:
        if not matrix.shape[0]:
            return 0.0
        diff = matrix @ x - rhs
        violation = np.abs(diff) if equality else np.maximum(diff, 0.0)
        norms = np.sqrt(np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel())
        scale = np.maximum.reduce([np.ones_like(rhs), np.abs(rhs), norms * x_scale])
        return float(np.max(violation / scale))

    linear = max(row_residual(compiled.a_eq, compiled.b_eq, True),
                 row_residual(compiled.a_le, compiled.b_le, False))

    below = np.where(np.isfinite(compiled.lower), compiled.lower - x, 0.0)
    above = np.where(np.isfinite(compiled.upper), x - compiled.upper, 0.0)
    bound_scale = np.maximum(1.0, np.abs(np.where(np.isfinite(compiled.lower), compiled.lower, 0.0)))
    bound = float(np.max(np.maximum(np.maximum(below, above), 0.0) / bound_scale)) if x.size else 0.0

    cone = 0.0
    if compiled.cone_u.size:
        u, v = x[compiled.cone_u], x[compiled.cone_v]
        w = compiled.cone_w @ x + compiled.cone_w0
        excess = np.hypot(2.0 * w, u - v) - (u + v)
        cone = float(np.max(np.maximum(excess, 0.0) / np.maximum(1.0, u + v)))

    return FeasibilityReport(max_linear=linear, max_bound=bound, max_cone=cone, tol=tol)


def _build_cvxpy_problem(compiled: CompiledProgram):
    n = compiled.cost.size
    x = cp.Variable(n)
    constraints = []
    if compiled.a_eq.shape[0]:
        constraints.append(cp.Constant(compiled.a_eq) @ x == compiled.b_eq)
    if compiled.a_le.shape[0]:
        constraints.append(cp.Constant(compiled.a_le) @ x <= compiled.b_le)

    fixed = np.flatnonzero(compiled.lower == compiled.upper)
    has_lower = np.flatnonzero(np.isfinite(compiled.lower) & (compiled.lower != compiled.upper))
    has_upper = np.flatnonzero(np.isfinite(compiled.upper) & (compiled.lower != compiled.upper))
    if fixed.size:
        constraints.append(x[fixed] == compiled.lower[fixed])
    if has_lower.size:
        constraints.append(x[has_lower] >= compiled.lower[has_lower])
    if has_upper.size:
        constraints.append(x[has_upper] <= compiled.upper[has_upper])

    if compiled.cone_u.size:
        u, v = x[compiled.cone_u], x[compiled.cone_v]
        w = cp.Constant(compiled.cone_w) @ x + compiled.cone_w0
        constraints.append(cp.SOC(u + v, cp.vstack([2.0 * w, u - v]), axis=0))

    objective = cp.Minimize(compiled.cost @ x + compiled.constant)
    return cp.Problem(objective, constraints), x


def solve(prog: ConicProgram, tol_feas: float = DEFAULT_TOL_FEAS, tol_gap: float = DEFAULT_TOL_GAP,
          max_iter: int = DEFAULT_MAX_ITER) -> ConicSolution:
    """
    Solve ``prog`` with Clarabel.

    Never raises for solver trouble: infeasibility, unboundedness, iteration limits and
    numerical breakdowns come back as the solution status. Every optimal or nearly-solved
    result is re-checked with :func:`check_feasibility` at ten times ``tol_feas`` and is
    reported as NumericalFailure if the check fails.

    Args:
        prog (ConicProgram): The program.
        tol_feas (float): Primal/dual feasibility tolerance.
        tol_gap (float): Absolute and relative duality gap tolerance.
        max_iter (int): Iteration limit.

    Returns:
        ConicSolution: Status, objective, variable values, wall-clock time and iterations.
    """
    compiled = prog.compile()
    problem, x = _build_cvxpy_problem(compiled)
    logger.debug(f"Solving {prog.name}: {prog.num_vars} variables, {prog.num_rows} rows, "
                 f"{prog.num_cones} cones")

    start = time.perf_counter()
    try:
        problem.solve(solver=cp.CLARABEL, verbose=False, max_iter=int(max_iter),
                      tol_feas=tol_feas, tol_gap_abs=tol_gap, tol_gap_rel=tol_gap)
    except cp.error.SolverError as e:
        elapsed = time.perf_counter() - start
        logger.warning(f"Solver failure on {prog.name}: {str(e)}")
        return ConicSolution(SolveStatus.NUMERICAL_FAILURE, float('nan'), np.zeros(0),
                             elapsed, 0, str(e))
    elapsed = time.perf_counter() - start

    stats = problem.solver_stats
    iterations = int(stats.num_iters) if stats is not None and stats.num_iters is not None else 0
    values = np.asarray(x.value, dtype=float) if x.value is not None else np.zeros(0)

    report = None
    if problem.status == cp.OPTIMAL_INACCURATE:
        status = SolveStatus.OPTIMAL
    else:
        status = _CVXPY_STATUS.get(problem.status, SolveStatus.NUMERICAL_FAILURE)

    if status is SolveStatus.OPTIMAL:
        if values.size != compiled.cost.size:
            status = SolveStatus.NUMERICAL_FAILURE
        else:
            report = check_feasibility(prog, values, 10.0 * tol_feas)
            if not report.ok:
                logger.warning(f"{prog.name}: solver reported {problem.status} but the point fails "
                               f"the feasibility check (linear {report.max_linear:.2e}, "
                               f"bound {report.max_bound:.2e}, cone {report.max_cone:.2e})")
                status = SolveStatus.NUMERICAL_FAILURE
    value = objective_value(prog, values) if status is SolveStatus.OPTIMAL else float('nan')

    return ConicSolution(status, value, values, elapsed, iterations, str(problem.status), report)


def dump_program(prog: ConicProgram) -> str:
    """Plain-text listing of ``prog``, one item per line. Not a stable format."""
    compiled = prog.compile()
    lines = [f"# {prog.name}: {prog.num_vars} vars, {prog.num_rows} rows, {prog.num_cones} cones",
             f"objective constant {compiled.constant!r}"]

    for i in range(prog.num_vars):
        lines.append(f"var x{i} [{compiled.lower[i]!r}, {compiled.upper[i]!r}] cost {compiled.cost[i]!r}")

    def terms(matrix: sp.csr_matrix, row: int) -> str:
        start, end = matrix.indptr[row], matrix.indptr[row + 1]
        parts = [f"{matrix.data[k]!r}*x{matrix.indices[k]}" for k in range(start, end)]
        return " + ".join(parts) if parts else "0"

    for r in range(compiled.a_eq.shape[0]):
        lines.append(f"row eq {terms(compiled.a_eq, r)} = {compiled.b_eq[r]!r}")
    for r in range(compiled.a_le.shape[0]):
        lines.append(f"row le {terms(compiled.a_le, r)} <= {compiled.b_le[r]!r}")
    for k in range(compiled.cone_u.size):
        lines.append(f"rsoc x{compiled.cone_u[k]} * x{compiled.cone_v[k]} >= "
                     f"({terms(compiled.cone_w, k)} + {compiled.cone_w0[k]!r})^2")
    return "\n".join(lines) + "\n"
