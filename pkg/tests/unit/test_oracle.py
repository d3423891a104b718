"""
Unit tests for the brute-force oracle.
"""
import itertools

import numpy as np
import pytest

from src.core import oracle
from src.core.optimizer import optimize, optimize_operation
from src.core.oracle import OracleError
from src.core.system_model import LossParams, Sizing, capex
from tests.fixtures.scenarios import ORACLE_SIZING, make_scenario, toy_scenario


@pytest.mark.unit
class TestOracleGuards:
    """Tests for the complexity guard."""

    def test_too_many_steps(self):
        """Test that more than eight steps are refused."""
        scenario = make_scenario([1.0] * 9, [0.0] * 9)
        with pytest.raises(OracleError, match="at most 8 steps"):
            oracle.brute_force_operation(ORACLE_SIZING, scenario)

    @pytest.mark.parametrize("grid_steps", [1, 22])
    def test_grid_out_of_range(self, grid_steps):
        """Test that grids outside 2 to 21 levels are refused."""
        with pytest.raises(OracleError):
            oracle.brute_force_operation(ORACLE_SIZING, toy_scenario(), grid_steps=grid_steps)
        with pytest.raises(OracleError):
            oracle.discretization_bound(ORACLE_SIZING, toy_scenario(), grid_steps=grid_steps)


@pytest.mark.unit
class TestOracleValues:
    """Tests for oracle costs on hand-checkable cases."""

    def test_nothing_built(self):
        """Test that without components the load is bought from the grid."""
        cost = oracle.brute_force_operation(Sizing(), toy_scenario())
        assert cost == pytest.approx(2.0 * 0.26 * 10.0)

    def test_single_step_with_ideal_converters(self):
        """Test one step: half the load from PV, half from the grid."""
        losses = LossParams(pv_dcdc=None, battery_dcdc=None, inverter=None)
        scenario = make_scenario([1.0], [0.5], losses=losses)
        sizing = Sizing(pv_wp=1.0, e_b_nom=1.0, p_pv_nom=1.0, p_b_nom=1.0, p_inv_nom=2.0)
        cost = oracle.brute_force_operation(sizing, scenario)
        assert cost == pytest.approx(0.5 * 0.26 * 10.0 + capex(sizing, scenario.costs))

    def test_bound_shrinks_with_finer_grid(self):
        """Test that the discretization bound falls as the grid is refined."""
        coarse = oracle.discretization_bound(ORACLE_SIZING, toy_scenario(), grid_steps=5)
        fine = oracle.discretization_bound(ORACLE_SIZING, toy_scenario(), grid_steps=21)
        assert 0.0 < fine < coarse


@pytest.mark.unit
class TestOracleAgainstSolver:
    """Tests comparing the oracle with the relaxed optimum."""

    @pytest.mark.parametrize("grid_steps", [11, 21])
    def test_solver_is_never_worse(self, grid_steps):
        """Test that the relaxed optimum lies below the oracle within the discretization bound."""
        scenario = toy_scenario()
        solver_cost = optimize_operation(scenario, ORACLE_SIZING).stage1_objective
        oracle_cost = oracle.brute_force_operation(ORACLE_SIZING, scenario, grid_steps)
        bound = oracle.discretization_bound(ORACLE_SIZING, scenario, grid_steps)

        # solver cost is accurate to its relative gap tolerance
        slack = 10.0 * scenario.solver.tol_gap * abs(oracle_cost)
        assert solver_cost <= oracle_cost + slack
        assert oracle_cost - solver_cost <= 1.05 * bound + slack

    def test_sizing_beats_sizing_grid(self):
        """Test that the sized optimum is no dearer than any sizing on a coarse grid operated by the oracle."""
        scenario = toy_scenario(annualize=True, c_grid_inject=0.0)
        solver_cost = optimize(scenario).stage1_objective

        grid_costs = []
        for sizes in itertools.product(np.linspace(0.0, 3.0, 7), np.linspace(0.0, 2.0, 5),
                                       np.linspace(0.0, 3.0, 4), np.linspace(0.0, 1.5, 4),
                                       np.linspace(0.0, 2.0, 5)):
            sizing = Sizing(*sizes)
            try:
                grid_costs.append(oracle.brute_force_operation(sizing, scenario, grid_steps=5))
            except OracleError:
                continue

        best = min(grid_costs)
        slack = 10.0 * scenario.solver.tol_gap * abs(best)
        assert solver_cost <= best + slack
        # building something pays off on this profile
        assert best < oracle.brute_force_operation(Sizing(), scenario, grid_steps=5)
