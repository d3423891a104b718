"""
Unit tests for the conic module.
"""
import pytest
import numpy as np
from unittest.mock import patch

from src.core import conic
from src.core.conic import Affine, ConicProgram, ProgramError, Sense, SolveStatus


def _assert_checked(prog, sol):
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.feasibility is not None and sol.feasibility.ok
    assert conic.check_feasibility(prog, sol.var_values, 10 * conic.DEFAULT_TOL_FEAS).ok
    assert sol.objective_value == pytest.approx(conic.objective_value(prog, sol.var_values), rel=1e-9)


@pytest.mark.unit
class TestConicProgram:
    """Tests for program construction."""

    def test_variable_indices(self):
        """Test that indices are assigned in order."""
        prog = ConicProgram()
        assert prog.add_variable(0.0, np.inf, 1.0) == 0
        assert prog.add_variable() == 1
        assert prog.num_vars == 2

    def test_inverted_bounds_rejected(self):
        """Test that lower > upper is rejected."""
        with pytest.raises(ProgramError):
            ConicProgram().add_variable(5.0, 3.0)

    def test_block_variables(self):
        """Test vectorized variable creation."""
        prog = ConicProgram()
        idx = prog.add_variables(3, lower=[-1.0, 0.0, 1.0], upper=4.0, cost=2.0)
        np.testing.assert_array_equal(idx, [0, 1, 2])
        np.testing.assert_array_equal(prog.lower, [-1.0, 0.0, 1.0])
        np.testing.assert_array_equal(prog.cost, [2.0, 2.0, 2.0])

    def test_invalid_index_rejected(self):
        """Test that rows referencing unknown variables are rejected."""
        prog = ConicProgram()
        prog.add_variable()
        with pytest.raises(ProgramError):
            prog.add_linear({3: 1.0}, Sense.LE, 1.0)
        with pytest.raises(ProgramError):
            prog.add_rsoc(0, 5, Affine({0: 1.0}))

    def test_nan_coefficient_rejected(self):
        """Test that NaN coefficients are rejected."""
        prog = ConicProgram()
        x = prog.add_variable()
        with pytest.raises(ProgramError):
            prog.add_linear({x: np.nan}, Sense.EQ, 0.0)

    def test_cone_tightens_lower_bounds(self):
        """Test that a free cone variable gets lower bound 0."""
        prog = ConicProgram()
        u = prog.add_variable(-np.inf, np.inf)
        v = prog.add_variable(-5.0, np.inf)
        w = prog.add_variable(-np.inf, np.inf)
        prog.add_rsoc(u, v, Affine({w: 1.0}))
        assert prog.lower[u] == 0.0
        assert prog.lower[v] == 0.0
        assert prog.lower[w] == -np.inf

    def test_dump_lists_everything(self):
        """Test the text dump."""
        prog = ConicProgram("tiny")
        x = prog.add_variable(0.0, 3.0, -1.0)
        y = prog.add_variable()
        prog.add_linear({x: 1.0, y: 1.0}, Sense.GE, 1.0)
        prog.add_rsoc(x, y, Affine({}, 0.5))
        text = conic.dump_program(prog)
        assert text.startswith("# tiny: 2 vars, 1 rows, 1 cones")
        assert "row le" in text
        assert "rsoc x0 * x1" in text


@pytest.mark.unit
class TestSolve:
    """Tests for solving small programs with known optima."""

    def test_cone_boundary(self):
        """Test min x s.t. x*1 >= y^2, y = 2."""
        prog = ConicProgram()
        x = prog.add_variable(0.0, np.inf, 1.0)
        one = prog.add_variable(1.0, 1.0)
        y = prog.add_variable(-np.inf, np.inf)
        prog.add_linear({y: 1.0}, Sense.EQ, 2.0)
        prog.add_rsoc(x, one, Affine({y: 1.0}))
        sol = conic.solve(prog)
        _assert_checked(prog, sol)
        assert sol.var_values[x] == pytest.approx(4.0, abs=1e-6)

    def test_lp_corner(self):
        """Test min -x s.t. x <= 3."""
        prog = ConicProgram()
        x = prog.add_variable(-np.inf, np.inf, -1.0)
        prog.add_linear({x: 1.0}, Sense.LE, 3.0)
        sol = conic.solve(prog)
        _assert_checked(prog, sol)
        assert sol.var_values[x] == pytest.approx(3.0, abs=1e-6)
        assert sol.objective_value == pytest.approx(-3.0, abs=1e-6)

    def test_cone_and_line(self):
        """Test min x1 + x2 s.t. x1 + x2 >= 1, x1*x2 >= 0.36."""
        prog = ConicProgram()
        x1 = prog.add_variable(0.0, np.inf, 1.0)
        x2 = prog.add_variable(0.0, np.inf, 1.0)
        prog.add_linear({x1: 1.0, x2: 1.0}, Sense.GE, 1.0)
        prog.add_rsoc(x1, x2, Affine({}, 0.6))
        sol = conic.solve(prog)
        _assert_checked(prog, sol)
        assert sol.objective_value == pytest.approx(1.2, abs=1e-6)
        assert sol.var_values[x1] == pytest.approx(0.6, abs=1e-6)
        assert sol.var_values[x2] == pytest.approx(0.6, abs=1e-6)

    def test_interval_from_cone(self):
        """Test that 4*1 >= x^2 confines x to [-2, 2]."""
        for sign in (1.0, -1.0):
            prog = ConicProgram()
            four = prog.add_variable(4.0, 4.0)
            one = prog.add_variable(1.0, 1.0)
            x = prog.add_variable(-np.inf, np.inf, sign)
            prog.add_rsoc(four, one, Affine({x: 1.0}))
            sol = conic.solve(prog)
            _assert_checked(prog, sol)
            assert sol.var_values[x] == pytest.approx(-2.0 * sign, abs=1e-6)

    def test_degenerate_cone(self):
        """Test that w = 0 only requires u, v >= 0."""
        prog = ConicProgram()
        u = prog.add_variable(-np.inf, np.inf, 1.0)
        v = prog.add_variable(-np.inf, np.inf, 1.0)
        prog.add_rsoc(u, v, Affine())
        sol = conic.solve(prog)
        _assert_checked(prog, sol)
        assert sol.objective_value == pytest.approx(0.0, abs=1e-6)

    def test_infeasible(self):
        """Test that contradictory rows report Infeasible."""
        prog = ConicProgram()
        x = prog.add_variable(0.0, 1.0, 1.0)
        prog.add_linear({x: 1.0}, Sense.GE, 2.0)
        assert conic.solve(prog).status is SolveStatus.INFEASIBLE

    def test_unbounded(self):
        """Test that an unbounded objective reports Unbounded."""
        prog = ConicProgram()
        x = prog.add_variable(-np.inf, np.inf, 1.0)
        prog.add_linear({x: 1.0}, Sense.LE, 5.0)
        assert conic.solve(prog).status is SolveStatus.UNBOUNDED

    def test_solver_exception_becomes_status(self):
        """Test that backend errors surface as NumericalFailure."""
        prog = ConicProgram()
        prog.add_variable(0.0, 1.0, 1.0)
        with patch('cvxpy.Problem.solve', side_effect=conic.cp.error.SolverError("boom")):
            sol = conic.solve(prog)
        assert sol.status is SolveStatus.NUMERICAL_FAILURE
        assert not sol.is_optimal

    def test_failed_check_downgrades_optimal(self):
        """Test that an Optimal point failing the feasibility check is not accepted."""
        prog = ConicProgram()
        x = prog.add_variable(-np.inf, np.inf, -1.0)
        prog.add_linear({x: 1.0}, Sense.LE, 3.0)
        failing = conic.FeasibilityReport(max_linear=1e-3, max_bound=0.0, max_cone=0.0, tol=1e-7)
        with patch('src.core.conic.check_feasibility', return_value=failing) as mock_check:
            sol = conic.solve(prog)
        mock_check.assert_called_once()
        assert sol.status is SolveStatus.NUMERICAL_FAILURE
        assert np.isnan(sol.objective_value)
        assert sol.feasibility is failing

    def test_repeatable(self):
        """Test that solving twice gives the same objective."""
        prog = ConicProgram()
        x1 = prog.add_variable(0.0, np.inf, 1.0)
        x2 = prog.add_variable(0.0, np.inf, 2.0)
        prog.add_linear({x1: 1.0, x2: 1.0}, Sense.GE, 1.0)
        prog.add_rsoc(x1, x2, Affine({}, 0.3))
        first, second = conic.solve(prog), conic.solve(prog)
        assert first.status is second.status
        assert first.objective_value == pytest.approx(second.objective_value, rel=1e-9)


@pytest.mark.unit
class TestFeasibilityChecker:
    """Tests for the independent checker."""

    def test_detects_violations(self):
        """Test row, bound and cone violations."""
        prog = ConicProgram()
        x = prog.add_variable(0.0, 1.0)
        y = prog.add_variable(0.0, np.inf)
        prog.add_linear({x: 1.0, y: 1.0}, Sense.EQ, 1.0)
        prog.add_rsoc(x, y, Affine({}, 1.0))
        report = conic.check_feasibility(prog, np.array([2.0, 0.0]), 1e-8)
        assert report.max_linear > 0
        assert report.max_bound > 0
        assert report.max_cone > 0
        assert not report.ok

    def test_accepts_feasible_point(self):
        """Test a feasible point."""
        prog = ConicProgram()
        x = prog.add_variable(0.0, 4.0)
        y = prog.add_variable(0.0, np.inf)
        prog.add_linear({x: 1.0, y: 1.0}, Sense.LE, 5.0)
        prog.add_rsoc(x, y, Affine({}, 1.0))
        assert conic.check_feasibility(prog, np.array([2.0, 2.0]), 1e-12).ok
