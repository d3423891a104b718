"""
Analysis module for PVBat-Sizer.

This module evaluates optimization results:
- Self-consumption, self-sufficiency, grid energies and battery usage KPIs
- Normalized charge and discharge duration curves
- The four-way loss formulation comparison, run concurrently, with KPIs and sizes relative to CC-CB
- A time-resolution study based on profile averaging
- CSV and JSON writers for the tables above
"""

import json
import time
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.core.optimizer import OptimizationError, optimize, optimize_operation
from src.core.profiles import HOURS_PER_YEAR, Profile, resample_average
from src.core.system_model import (
    FORMULATION_LABELS,
    FormulationSpec,
    OperationSchedule,
    Scenario,
    Sizing,
    SIZING_FIELDS,
    W_PER_KW,
)

logger = logging.getLogger(__name__)

DURATION_TOL = 1e-9
SIZE_FLOOR = 1e-6


class AnalysisError(ValueError):
    """Raised for inconsistent analysis inputs."""


@dataclass(frozen=True)
class AnalysisSettings:
    pv_energy_basis: str = "ppv"
    idle_threshold: float = 0.01

    def __post_init__(self) -> None:
        if self.pv_energy_basis not in ("ppv", "ppvi"):
            raise AnalysisError(f"pv_energy_basis must be ppv or ppvi, got {self.pv_energy_basis!r}")
        if not 0.0 <= self.idle_threshold <= 1.0:
            raise AnalysisError(f"idle_threshold must lie in [0, 1], got {self.idle_threshold}")


@dataclass
class Kpis:
    """Energies in kWh per year; fractions in [0, 1]."""
    self_consumption: float
    self_sufficiency: float
    grid_injection: float
    grid_withdrawal: float
    battery_idle_fraction: float
    battery_full_cycles: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "self_consumption": self.self_consumption,
            "self_sufficiency": self.self_sufficiency,
            "grid_injection_kwh_per_year": self.grid_injection,
            "grid_withdrawal_kwh_per_year": self.grid_withdrawal,
            "battery_idle_fraction": self.battery_idle_fraction,
            "battery_full_cycles": self.battery_full_cycles,
        }


KPI_FIELDS = ("self_consumption", "self_sufficiency", "grid_injection_kwh_per_year",
              "grid_withdrawal_kwh_per_year", "battery_idle_fraction", "battery_full_cycles")


def _fraction(numerator: float, denominator: float) -> float:
    if denominator <= 0.0:
        return 0.0
    return float(np.clip(numerator / denominator, 0.0, 1.0))


def compute_kpis(schedule: OperationSchedule, load: Profile, pv_available: np.ndarray,
                 sizing: Sizing, settings: Optional[AnalysisSettings] = None) -> Kpis:
    """
    Compute the KPIs of a schedule.

    Args:
        schedule (OperationSchedule): Operation schedule.
        load (Profile): Household load profile (W).
        pv_available (np.ndarray): Available PV power per timestep (kW).
        sizing (Sizing): Component sizes.
        settings (AnalysisSettings, optional): PV energy basis and idle threshold.

    Returns:
        Kpis: KPI values; energies annualized to a year.

    Raises:
        AnalysisError: If the lengths differ.
    """
    settings = settings or AnalysisSettings()
    pv_available = np.asarray(pv_available, dtype=float)
    n = len(schedule)
    if len(load) != n or pv_available.size != n:
        raise AnalysisError(f"length mismatch: schedule {n}, load {len(load)}, pv {pv_available.size}")

    dt = schedule.dt_hours
    annual = HOURS_PER_YEAR / (n * dt)
    pv_power = pv_available if settings.pv_energy_basis == "ppv" else schedule.ppvi
    e_pv = float(np.sum(pv_power) * dt)
    e_load = float(np.sum(load.values) / W_PER_KW * dt)
    e_inj = float(np.sum(np.clip(schedule.p_gi, 0.0, None)) * dt)
    e_wd = float(np.sum(np.clip(schedule.p_gw, 0.0, None)) * dt)

    if sizing.p_b_nom > 0.0:
        activity = np.maximum(schedule.pc, schedule.pd)
        idle = float(np.mean(activity < settings.idle_threshold * sizing.p_b_nom))
    else:
        idle = 1.0
    cycles = float(np.sum(np.clip(schedule.pd, 0.0, None)) * dt / sizing.e_b_nom) if sizing.e_b_nom > 0 else 0.0

    return Kpis(
        self_consumption=_fraction(e_pv - e_inj, e_pv),
        self_sufficiency=_fraction(e_load - e_wd, e_load),
        grid_injection=e_inj * annual,
        grid_withdrawal=e_wd * annual,
        battery_idle_fraction=idle,
        battery_full_cycles=cycles,
    )


def duration_curves(schedule: OperationSchedule, p_b_nom: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Charge and discharge power normalized by the converter rating, sorted descending.

    Raises:
        AnalysisError: If ``p_b_nom`` is zero while the battery carries power.
    """
    pc = np.clip(np.asarray(schedule.pc, dtype=float), 0.0, None)
    pd = np.clip(np.asarray(schedule.pd, dtype=float), 0.0, None)
    if p_b_nom <= 0.0:
        if np.any(pc > DURATION_TOL) or np.any(pd > DURATION_TOL):
            raise AnalysisError("battery converter rating is zero but the battery carries power")
        return np.zeros_like(pc), np.zeros_like(pd)
    return np.sort(pc / p_b_nom)[::-1], np.sort(pd / p_b_nom)[::-1]


@dataclass
class ComparisonRow:
    """
    One formulation's outcome.

    ``sizing_rel_diff`` holds ``(size - reference) / reference`` per component against the
    CC-CB row; it is empty when CC-CB was not run or failed, and a component the reference
    does not build has no entry. ``duration`` keeps the normalized charge and discharge
    duration curves and is not serialized.
    """
    label: str
    status: str
    objective: float = float('nan')
    objective_under_convex_operation: float = float('nan')
    sizing: Optional[Sizing] = None
    kpis: Optional[Kpis] = None
    sizing_rel_diff: Dict[str, float] = field(default_factory=dict)
    duration: Optional[Tuple[np.ndarray, np.ndarray]] = None
    runtime_s: float = 0.0
    tight: Optional[bool] = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> Dict[str, Any]:
        sizing = self.sizing.to_dict() if self.sizing is not None else {name: None for name in SIZING_FIELDS}
        if self.kpis is not None:
            kpis = {key: _json_number(value) for key, value in self.kpis.to_dict().items()}
        else:
            kpis = {key: None for key in KPI_FIELDS}
        rel_diff = {f"{name}_rel_diff": _json_number(self.sizing_rel_diff.get(name))
                    for name in SIZING_FIELDS}
        return {
            "label": self.label,
            "status": self.status,
            "objective_eur": _json_number(self.objective),
            "objective_under_convex_operation_eur": _json_number(self.objective_under_convex_operation),
            **sizing,
            **rel_diff,
            **kpis,
            "runtime_s": self.runtime_s,
            "tight": self.tight,
            "error": self.error,
        }


def _json_number(value: Optional[float]) -> Optional[float]:
    return None if value is None or not np.isfinite(value) else float(value)


def sizing_rel_diff(sizing: Sizing, reference: Sizing, floor: float = SIZE_FLOOR) -> Dict[str, float]:
    """Relative size difference per component; components the reference leaves out are skipped."""
    ours, ref = sizing.to_dict(), reference.to_dict()
    return {name: (ours[name] - ref[name]) / ref[name] for name in SIZING_FIELDS if ref[name] > floor}


def _run_variant(scenario: Scenario, label: str, settings: AnalysisSettings) -> ComparisonRow:
    base = scenario.formulation
    form = FormulationSpec.from_label(label, base.linear_efficiency_basis, base.eta)
    start = time.perf_counter()
    try:
        result = optimize(scenario.with_formulation(form))
        if label == "CC-CB":
            under_convex = result.stage1_objective
        else:
            convex = scenario.with_formulation(FormulationSpec.from_label("CC-CB"))
            under_convex = optimize_operation(convex, result.sizing).stage1_objective
        pv_available = scenario.pv_availability * result.sizing.pv_wp
        kpis = compute_kpis(result.schedule, scenario.load, pv_available, result.sizing, settings)
        curves = duration_curves(result.schedule, result.sizing.p_b_nom)
    except (OptimizationError, ValueError) as e:
        logger.error(f"{label} failed: {str(e)}")
        return ComparisonRow(label=label, status="failed", runtime_s=time.perf_counter() - start,
                             error=str(e))

    runtime = time.perf_counter() - start
    logger.info(f"{label}: objective {result.stage1_objective:.2f} €, under convex operation "
                f"{under_convex:.2f} €, {runtime:.1f} s")
    return ComparisonRow(
        label=label, status="ok", objective=result.stage1_objective,
        objective_under_convex_operation=under_convex, sizing=result.sizing, kpis=kpis,
        duration=curves, runtime_s=runtime, tight=result.slack.ok,
    )


def compare_formulations(scenario: Scenario, labels: Iterable[str] = FORMULATION_LABELS,
                         settings: Optional[AnalysisSettings] = None,
                         max_workers: int = 4) -> List[ComparisonRow]:
    """
    Optimize the scenario under each loss formulation.

    Variants other than CC-CB are also re-operated under the fully convex formulation with
    their own sizing fixed, and every successful row gets its sizing difference relative to
    CC-CB when CC-CB succeeded. Failed variants come back as rows with status ``failed``.

    Args:
        scenario (Scenario): Base scenario; its formulation supplies the efficiency basis
            and any pinned efficiencies.
        labels: Formulation labels to run.
        settings (AnalysisSettings, optional): KPI settings.
        max_workers (int): Concurrent variants.

    Returns:
        List[ComparisonRow]: One row per label, ordered as ``FORMULATION_LABELS``.

    Raises:
        AnalysisError: On an unknown label.
    """
    settings = settings or AnalysisSettings()
    labels = list(dict.fromkeys(labels))
    unknown = [label for label in labels if label not in FORMULATION_LABELS]
    if unknown:
        raise AnalysisError(f"unknown formulation label(s): {', '.join(unknown)}")

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {label: pool.submit(_run_variant, scenario, label, settings) for label in labels}
        rows = {label: future.result() for label, future in futures.items()}
    reference = rows.get("CC-CB")
    if reference is not None and reference.ok:
        for row in rows.values():
            if row.ok:
                row.sizing_rel_diff = sizing_rel_diff(row.sizing, reference.sizing)
    return [rows[label] for label in FORMULATION_LABELS if label in rows]


@dataclass
class ResolutionRow:
    factor: int
    dt_hours: float
    n_steps: int
    status: str
    objective: float = float('nan')
    runtime_s: float = 0.0
    statuses: Optional[Dict[str, str]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"factor": self.factor, "dt_hours": self.dt_hours, "n_steps": self.n_steps,
                "status": self.status, "objective_eur": _json_number(self.objective),
                "runtime_s": self.runtime_s, "stage_status": self.statuses}


def resample_scenario(scenario: Scenario, factor: int) -> Scenario:
    """The scenario with both profiles averaged over blocks of ``factor`` samples."""
    load = resample_average(scenario.load, factor)
    pv = resample_average(scenario.pv, factor)
    return replace(scenario, load=load, pv=pv, costs=replace(scenario.costs, dt_hours=load.dt_hours))


def resolution_study(scenario: Scenario, factors: Iterable[int] = (4, 2, 1)) -> List[ResolutionRow]:
    """Solve the scenario at coarser resolutions, one row per averaging factor."""
    rows = []
    for factor in factors:
        coarse = resample_scenario(scenario, factor)
        start = time.perf_counter()
        try:
            result = optimize(coarse)
        except OptimizationError as e:
            logger.error(f"Resolution {coarse.dt_hours} h failed: {str(e)}")
            rows.append(ResolutionRow(factor, coarse.dt_hours, coarse.n_steps, "failed",
                                      runtime_s=time.perf_counter() - start))
            continue
        rows.append(ResolutionRow(factor, coarse.dt_hours, coarse.n_steps, "ok",
                                  objective=result.stage1_objective,
                                  runtime_s=time.perf_counter() - start,
                                  statuses=dict(result.statuses)))
        logger.info(f"Resolution {coarse.dt_hours} h ({coarse.n_steps} steps): "
                    f"{result.stage1_objective:.2f} € in {rows[-1].runtime_s:.1f} s")
    return rows


def write_comparison_csv(rows: List[ComparisonRow], path: str) -> None:
    pd.DataFrame([row.to_dict() for row in rows]).to_csv(path, index=False, lineterminator='\n')


def write_comparison_json(rows: List[ComparisonRow], path: str) -> None:
    with open(path, 'w') as f:
        json.dump({"rows": [row.to_dict() for row in rows]}, f, indent=2, sort_keys=True)
        f.write("\n")


def write_duration_curves_csv(charge: np.ndarray, discharge: np.ndarray, path: str) -> None:
    """Two-column CSV of the normalized charge and discharge duration curves."""
    frame = pd.DataFrame({"charge_pu": charge, "discharge_pu": discharge})
    frame.to_csv(path, index_label="rank", lineterminator='\n')
