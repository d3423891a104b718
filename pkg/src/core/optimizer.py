"""
Optimizer module for PVBat-Sizer.

This module runs the two-stage solve and checks its outcome:
- Stage 1: minimize the total cost of ownership (sizing and operation)
- Stage 2: minimize losses with the sizing fixed and the stage-1 cost as a cap
- Relaxation check: loss variables versus the exact loss models, per site
- Complementarity check of charge/discharge, injection/withdrawal and the inverter split
- Re-evaluation of the cost with exact losses
"""

import time
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from src.core import conic
from src.core.conic import ConicSolution, SolveStatus
from src.core.system_model import (
    EUR_PER_KEUR,
    FormulationSpec,
    LossParams,
    OperationSchedule,
    Scenario,
    Sizing,
    VerificationSettings,
    build_operation_program,
    build_sizing_program,
    capex,
    extract_schedule,
    extract_sizing,
    resolve_loss_sites,
    tco,
)

logger = logging.getLogger(__name__)

RATING_FLOOR_KW = 1e-3
COMPLEMENTARITY_PAIRS = {
    "battery": ("pc", "pd", "p_b_nom"),
    "grid": ("p_gi", "p_gw", "p_inv_nom"),
    "inverter": ("p_inv_pos", "p_inv_neg", "p_inv_nom"),
}


class OptimizationError(RuntimeError):
    """Raised when a stage does not reach an optimal solution."""

    def __init__(self, stage: int, status: SolveStatus, message: str = ""):
        self.stage = stage
        self.status = status
        detail = f": {message}" if message else ""
        super().__init__(f"stage {stage} ended with status {status.value}{detail}")


@dataclass
class SiteSlack:
    max_abs_kw: float
    max_rel: float


@dataclass
class SlackReport:
    """
    Gap between the loss variables and the exact losses, and complementarity residuals.

    Complementarity values are ``max_t min(a_t, b_t)`` in kW per pair.
    """
    sites: Dict[str, SiteSlack]
    complementarity: Dict[str, float]
    complementarity_bounds: Dict[str, float]
    slack_tol_rel: float
    tight_within_tol: bool
    complementary_within_tol: bool

    @property
    def max_abs_slack(self) -> float:
        return max((s.max_abs_kw for s in self.sites.values()), default=0.0)

    @property
    def max_rel_slack(self) -> float:
        return max((s.max_rel for s in self.sites.values()), default=0.0)

    @property
    def ok(self) -> bool:
        return self.tight_within_tol and self.complementary_within_tol

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sites": {name: {"max_abs_kw": s.max_abs_kw, "max_rel": s.max_rel}
                      for name, s in self.sites.items()},
            "complementarity_kw": dict(self.complementarity),
            "complementarity_bounds_kw": dict(self.complementarity_bounds),
            "slack_tol_rel": self.slack_tol_rel,
            "max_abs_slack_kw": self.max_abs_slack,
            "max_rel_slack": self.max_rel_slack,
            "tight_within_tol": self.tight_within_tol,
            "complementary_within_tol": self.complementary_within_tol,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SlackReport":
        return cls(
            sites={name: SiteSlack(float(s["max_abs_kw"]), float(s["max_rel"]))
                   for name, s in data["sites"].items()},
            complementarity={k: float(v) for k, v in data["complementarity_kw"].items()},
            complementarity_bounds={k: float(v) for k, v in data["complementarity_bounds_kw"].items()},
            slack_tol_rel=float(data["slack_tol_rel"]),
            tight_within_tol=bool(data["tight_within_tol"]),
            complementary_within_tol=bool(data["complementary_within_tol"]),
        )


@dataclass
class SizingResult:
    formulation: str
    sizing: Sizing
    stage1_objective: float
    stage2_objective: float
    stage2_losses: float
    exact_objective: float
    schedule: OperationSchedule
    slack: SlackReport
    runtimes: Dict[str, float] = field(default_factory=dict)
    statuses: Dict[str, str] = field(default_factory=dict)
    iterations: Dict[str, int] = field(default_factory=dict)

    @property
    def exact_objective_change(self) -> float:
        """Relative change of the cost when recomputed with exact losses."""
        return abs(self.exact_objective - self.stage2_objective) / max(abs(self.stage2_objective), 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "formulation": self.formulation,
            "sizing": self.sizing.to_dict(),
            "stage1_objective_eur": self.stage1_objective,
            "stage2_objective_eur": self.stage2_objective,
            "stage2_losses_kwh": self.stage2_losses,
            "exact_objective_eur": self.exact_objective,
            "exact_objective_change_rel": self.exact_objective_change,
            "status": dict(self.statuses),
            "iterations": dict(self.iterations),
        }


def _solve_stage(stage: int, prog: conic.ConicProgram, scenario: Scenario) -> ConicSolution:
    settings = scenario.solver
    logger.info(f"Stage {stage}: solving {prog.name}")
    solution = conic.solve(prog, tol_feas=settings.tol_feas, tol_gap=settings.tol_gap,
                           max_iter=settings.max_iter)
    logger.info(f"Stage {stage}: {solution.status.value} after {solution.iterations} iterations "
                f"in {solution.solve_time_s:.2f} s")
    if not solution.is_optimal:
        raise OptimizationError(stage, solution.status, solution.message)
    return solution


def _two_stage(scenario: Scenario, fixed_sizing: Optional[Sizing]) -> SizingResult:
    start = time.perf_counter()
    prog1, map1 = build_sizing_program(scenario, fixed_sizing=fixed_sizing)
    build1 = time.perf_counter() - start
    sol1 = _solve_stage(1, prog1, scenario)
    stage1_objective = sol1.objective_value * EUR_PER_KEUR
    sizing = extract_sizing(sol1, map1) if fixed_sizing is None else fixed_sizing

    cap = stage1_objective + scenario.solver.cap_epsilon * max(abs(stage1_objective), 1.0)
    start = time.perf_counter()
    prog2, map2 = build_operation_program(scenario, sizing, objective_cap=cap)
    build2 = time.perf_counter() - start
    sol2 = _solve_stage(2, prog2, scenario)
    schedule = extract_schedule(sol2, map2)

    start = time.perf_counter()
    slack = verify_relaxation(schedule, sizing, scenario.losses, scenario.formulation,
                              scenario.verification)
    exact = reevaluate_objective(schedule, sizing, scenario)
    verification_time = time.perf_counter() - start

    stage2_objective = tco(schedule, sizing, scenario.costs, scenario.operation_weight)
    if stage2_objective > cap + 1e-9 * max(abs(cap), 1.0):
        logger.warning(f"Stage-2 cost {stage2_objective:.6f} € exceeds its cap {cap:.6f} €")

    result = SizingResult(
        formulation=scenario.formulation.label,
        sizing=sizing,
        stage1_objective=stage1_objective,
        stage2_objective=stage2_objective,
        stage2_losses=float(np.sum(schedule.total_loss()) * schedule.dt_hours),
        exact_objective=exact,
        schedule=schedule,
        slack=slack,
        runtimes={"stage1_build_s": build1, "stage1_solve_s": sol1.solve_time_s,
                  "stage2_build_s": build2, "stage2_solve_s": sol2.solve_time_s,
                  "verification_s": verification_time},
        statuses={"stage1": sol1.status.value, "stage2": sol2.status.value},
        iterations={"stage1": sol1.iterations, "stage2": sol2.iterations},
    )
    verdict = "tight" if slack.ok else "NOT tight"
    logger.info(f"{result.formulation}: objective {stage1_objective:.2f} €, "
                f"losses {result.stage2_losses:.3f} kWh, relaxation {verdict} "
                f"(max relative slack {slack.max_rel_slack:.2e})")
    return result


def optimize(scenario: Scenario) -> SizingResult:
    """
    Size and operate the system in two stages.

    Args:
        scenario (Scenario): The scenario to solve.

    Returns:
        SizingResult: Sizing, stage-2 schedule, objectives and the slack report.

    Raises:
        OptimizationError: If either stage is not solved to optimality.
    """
    return _two_stage(scenario, None)


def optimize_operation(scenario: Scenario, sizing: Sizing) -> SizingResult:
    """Two-stage solve of the operation only, for a given sizing."""
    return _two_stage(scenario, sizing)


def verify_relaxation(schedule: OperationSchedule, sizing: Sizing, losses: LossParams,
                      form: Optional[FormulationSpec] = None,
                      settings: Optional[VerificationSettings] = None) -> SlackReport:
    """
    Compare every site's reported loss with its exact loss and measure complementarity.

    Exact losses use the same model per site as the formulation did: the quadratic
    model for relaxed sites, the constant efficiency for linear ones.
    Complementarity bounds are ``complementarity_tol`` times the larger of the pair's
    component rating and the peak load, floored at 1 W.

    Args:
        schedule (OperationSchedule): Schedule with per-site total losses.
        sizing (Sizing): Component sizes the schedule was produced with.
        losses (LossParams): Loss parameters.
        form (FormulationSpec, optional): Formulation; fully convex by default.
        settings (VerificationSettings, optional): Tolerances.

    Returns:
        SlackReport: Per-site slack maxima and complementarity residuals.
    """
    form = form or FormulationSpec()
    settings = settings or VerificationSettings()
    flows = schedule.flow_dict()

    sites = {}
    for model in resolve_loss_sites(losses, form):
        exact = model.evaluate(flows, getattr(sizing, model.rating))
        reported = schedule.losses[model.name].total
        slack = reported - exact
        floor = np.maximum(np.clip(reported, 0.0, None), settings.slack_floor_kw)
        sites[model.name] = SiteSlack(
            max_abs_kw=float(np.max(np.abs(slack))) if slack.size else 0.0,
            max_rel=float(np.max(np.abs(slack) / floor)) if slack.size else 0.0,
        )

    complementarity, bounds = {}, {}
    peak_load = float(np.max(np.abs(schedule.load))) if len(schedule) else 0.0
    for pair, (first, second, rating) in COMPLEMENTARITY_PAIRS.items():
        overlap = np.minimum(np.clip(flows[first], 0.0, None), np.clip(flows[second], 0.0, None))
        complementarity[pair] = float(np.max(overlap)) if overlap.size else 0.0
        scale = max(getattr(sizing, rating), peak_load, RATING_FLOOR_KW)
        bounds[pair] = settings.complementarity_tol * scale

    tight = all(s.max_rel <= settings.slack_tol_rel for s in sites.values())
    complementary = all(complementarity[p] <= bounds[p] for p in complementarity)
    if not tight:
        worst = max(sites, key=lambda name: sites[name].max_rel)
        logger.warning(f"Relaxation is not tight: site {worst} has relative slack "
                       f"{sites[worst].max_rel:.3e}")
    if not complementary:
        logger.warning(f"Complementarity violated: {complementarity}")

    return SlackReport(sites=sites, complementarity=complementarity, complementarity_bounds=bounds,
                       slack_tol_rel=settings.slack_tol_rel, tight_within_tol=tight,
                       complementary_within_tol=complementary)


def reevaluate_objective(schedule: OperationSchedule, sizing: Sizing, scenario: Scenario) -> float:
    """
    Recompute the total cost of ownership in € with exact losses.

    The difference between exact and reported losses is taken out of the inverter output,
    and grid exchange is re-closed from the grid balance.
    """
    flows = schedule.flow_dict()
    delta = np.zeros(len(schedule))
    for model in resolve_loss_sites(scenario.losses, scenario.formulation):
        exact = model.evaluate(flows, getattr(sizing, model.rating))
        delta += exact - schedule.losses[model.name].total

    net = schedule.p_inv - delta - schedule.load
    costs = scenario.costs
    grid = np.sum(costs.c_grid_withdraw * np.clip(-net, 0.0, None)
                  - costs.c_grid_inject * np.clip(net, 0.0, None))
    return float(grid * schedule.dt_hours * scenario.operation_weight
                 + capex(sizing, costs))
