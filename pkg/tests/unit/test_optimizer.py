"""
Unit tests for the optimizer module.
"""
import copy
import pytest
import numpy as np
from unittest.mock import patch

from src.core import optimizer
from src.core.conic import ConicSolution, SolveStatus
from src.core.optimizer import OptimizationError, SlackReport
from src.core.system_model import (
    SITE_NAMES,
    LossParams,
    OperationSchedule,
    SiteLosses,
    Sizing,
    balance_residuals,
    tco,
)
from tests.fixtures.scenarios import ORACLE_SIZING, make_scenario, toy_scenario


def _zero_schedule(n=3, dt=1.0):
    zeros = np.zeros(n)
    flows = {name: zeros.copy() for name in ("pc", "pd", "ppv", "ppvi", "p_alpha", "p_beta",
                                             "p_gamma", "p_inv", "p_inv_pos", "p_inv_neg",
                                             "p_gi", "p_gw", "eb", "load")}
    losses = {name: SiteLosses(total=zeros.copy()) for name in SITE_NAMES}
    return OperationSchedule(dt_hours=dt, losses=losses, **flows)


@pytest.fixture(scope="module")
def sized_toy():
    """Annualized toy scenario without injection revenue, so PV and storage get built."""
    scenario = toy_scenario(annualize=True, c_grid_inject=0.0)
    return scenario, optimizer.optimize(scenario)


@pytest.mark.unit
class TestTwoStage:
    """Tests for the two-stage solve."""

    def test_free_grid_builds_nothing(self):
        """Test that a free grid leaves every size at zero."""
        result = optimizer.optimize(toy_scenario(c_grid_withdraw=0.0, c_grid_inject=0.0))
        np.testing.assert_allclose(result.sizing.as_array(), 0.0, atol=1e-5)
        assert result.stage1_objective == pytest.approx(0.0, abs=1e-4)
        assert result.slack.ok

    @pytest.mark.parametrize("scenario", [
        make_scenario([1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 0.0, 0.0]),
        toy_scenario(),
    ], ids=["forced_import", "uneconomic_pv"])
    def test_zero_size_optimum_passes_checks(self, scenario):
        """Test that optima without components pass the slack and complementarity checks."""
        result = optimizer.optimize(scenario)
        assert result.sizing.pv_wp == pytest.approx(0.0, abs=1e-5)
        assert result.slack.ok
        assert result.slack.complementarity["grid"] == 0.0

    def test_builds_and_stays_tight(self, sized_toy):
        """Test the annualized toy: components are built and the relaxation is tight."""
        _, result = sized_toy
        assert result.sizing.pv_wp > 0.0
        assert result.statuses == {"stage1": "Optimal", "stage2": "Optimal"}
        assert result.slack.tight_within_tol
        assert result.slack.complementary_within_tol
        assert result.slack.max_abs_slack <= 1e-5
        assert max(balance_residuals(result.schedule).values()) <= 1e-6

    def test_second_stage_respects_cap(self, sized_toy):
        """Test that the stage-2 cost stays within the stage-1 cost plus the cap margin."""
        scenario, result = sized_toy
        cap = result.stage1_objective + scenario.solver.cap_epsilon * max(abs(result.stage1_objective), 1.0)
        assert result.stage2_objective <= cap + 1e-6 * max(abs(cap), 1.0)
        assert result.stage2_losses >= 0.0

    def test_exact_cost_matches_when_tight(self, sized_toy):
        """Test that exact losses do not change the cost of a tight solution."""
        _, result = sized_toy
        assert result.exact_objective_change <= 1e-5

    def test_result_dict(self, sized_toy):
        """Test the serializable result."""
        _, result = sized_toy
        data = result.to_dict()
        assert data["formulation"] == "CC-CB"
        assert set(data["sizing"]) == {"pv_wp", "e_b_nom", "p_pv_nom", "p_b_nom", "p_inv_nom"}
        assert data["status"]["stage2"] == "Optimal"
        assert set(result.runtimes) >= {"stage1_solve_s", "stage2_solve_s", "verification_s"}

    def test_fixed_sizing(self):
        """Test that operation-only solves keep the given sizing."""
        result = optimizer.optimize_operation(toy_scenario(), ORACLE_SIZING)
        assert result.sizing == ORACLE_SIZING
        assert result.slack.ok

    @patch('src.core.optimizer.conic.solve')
    def test_failed_stage_raises(self, mock_solve):
        """Test that a non-optimal stage raises with its stage and status."""
        mock_solve.return_value = ConicSolution(SolveStatus.INFEASIBLE, np.nan, np.zeros(0), 0.0, 3)

        with pytest.raises(OptimizationError) as excinfo:
            optimizer.optimize(toy_scenario())

        assert excinfo.value.stage == 1
        assert excinfo.value.status is SolveStatus.INFEASIBLE
        assert "Infeasible" in str(excinfo.value)


@pytest.mark.unit
class TestVerifyRelaxation:
    """Tests for the independent relaxation check."""

    def test_all_zero_schedule(self):
        """Test that nothing built and nothing flowing has no slack."""
        report = optimizer.verify_relaxation(_zero_schedule(), Sizing(), LossParams())
        assert report.max_abs_slack == 0.0
        assert all(v == 0.0 for v in report.complementarity.values())
        assert report.ok

    def test_injected_loss_is_flagged(self, sized_toy):
        """Test that one kilowatt of phantom loss is detected."""
        scenario, result = sized_toy
        schedule = copy.deepcopy(result.schedule)
        schedule.losses["inverter"].total[0] += 1.0
        report = optimizer.verify_relaxation(schedule, result.sizing, scenario.losses)
        assert not report.tight_within_tol
        assert report.sites["inverter"].max_abs_kw >= 1.0 - 1e-5
        assert not report.ok

    def test_simultaneous_charge_is_flagged(self):
        """Test that charging and discharging in one step violates complementarity."""
        schedule = _zero_schedule()
        schedule.pc[1] = 0.5
        schedule.pd[1] = 0.4
        report = optimizer.verify_relaxation(schedule, Sizing(), LossParams.lossless())
        assert report.complementarity["battery"] == pytest.approx(0.4)
        assert not report.complementary_within_tol

    def test_bound_follows_peak_load(self):
        """Test that an unbuilt component is judged against the peak load."""
        schedule = _zero_schedule()
        schedule.load[:] = [2.0, 1.0, 0.5]
        schedule.pc[0] = 1.5e-6
        schedule.pd[0] = 1.5e-6
        report = optimizer.verify_relaxation(schedule, Sizing(), LossParams.lossless())
        assert report.complementarity_bounds["battery"] == pytest.approx(2e-6)
        assert report.complementary_within_tol
        schedule.pd[0] = 3e-6
        schedule.pc[0] = 3e-6
        assert not optimizer.verify_relaxation(schedule, Sizing(), LossParams.lossless()).complementary_within_tol

    def test_report_round_trip(self, sized_toy):
        """Test that the slack report survives its dict form."""
        _, result = sized_toy
        restored = SlackReport.from_dict(result.slack.to_dict())
        assert restored.sites.keys() == result.slack.sites.keys()
        assert restored.max_rel_slack == result.slack.max_rel_slack
        assert restored.ok == result.slack.ok


@pytest.mark.unit
class TestReevaluate:
    """Tests for the exact-loss cost."""

    def test_lossless_matches_tco(self):
        """Test that without losses the exact cost is the plain cost."""
        scenario = toy_scenario(annualize=True, c_grid_inject=0.0, losses=LossParams.lossless())
        result = optimizer.optimize(scenario)
        expected = tco(result.schedule, result.sizing, scenario.costs, scenario.operation_weight)
        assert result.exact_objective == pytest.approx(expected, rel=1e-6, abs=1e-4)

    def test_missing_loss_costs_more(self, sized_toy):
        """Test that under-reported losses raise the exact cost."""
        scenario, result = sized_toy
        schedule = copy.deepcopy(result.schedule)
        schedule.losses["pv_dcdc"].total[:] = 0.0
        exact = optimizer.reevaluate_objective(schedule, result.sizing, scenario)
        assert exact >= result.exact_objective - 1e-6
