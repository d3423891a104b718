"""
System model module for PVBat-Sizer.

This module translates a DC-coupled PV-battery scenario into a conic program:
- Scenario inputs (profiles, costs, loss parameters, formulation, solver settings)
- Decision variables per timestep and the five component sizes
- Loss constraints per formulation variant (rotated-cone relaxation or constant efficiency)
- PV, battery, inverter and power balance constraints
- The total-cost-of-ownership objective (sizing) or the loss objective (operation)
- Extraction of the operation schedule from a solution

Inside the program powers are in kW, energies in kWh and money in k€.
"""

import math
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.core import loss_models
from src.core.conic import ConicProgram, ConicSolution, Sense
from src.core.loss_models import BatteryLossParams, ConverterLossParams, LinearEfficiency
from src.core.profiles import HOURS_PER_YEAR, Profile, align_profiles

logger = logging.getLogger(__name__)

CONVEX = "convex"
LINEAR = "linear"
BEST_POINT = "best_point"
RATED = "rated"
FORMULATION_LABELS = ("CC-CB", "CC-LB", "LC-CB", "LC-LB")

W_PER_KW = 1000.0
EUR_PER_KEUR = 1000.0
ZERO_RATING = 1e-9

SIZING_FIELDS = ("pv_wp", "e_b_nom", "p_pv_nom", "p_b_nom", "p_inv_nom")
FLOW_NAMES = ("pc", "pd", "ppv", "ppvi", "p_alpha", "p_beta", "p_gamma",
              "p_inv_pos", "p_inv_neg", "p_gi", "p_gw", "eb")


class ModelError(ValueError):
    """Raised for inconsistent scenario data or unusable solutions."""


@dataclass(frozen=True)
class CostParams:
    """Economic inputs. Costs in €/kWp, €/kWh, €/kVA; horizon in years; dt in hours."""
    c_pv: float = 750.0
    c_battery: float = 250.0
    c_dcdc: float = 130.0
    c_inv: float = 200.0
    c_grid_withdraw: float = 0.26
    c_grid_inject: float = 0.1
    horizon_years: float = 10.0
    dt_hours: float = 0.25
    annualize: bool = False

    def __post_init__(self) -> None:
        for name in ("c_pv", "c_battery", "c_dcdc", "c_inv", "c_grid_withdraw", "c_grid_inject"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ModelError(f"{name} must be a non-negative number, got {value}")
        if not self.horizon_years > 0.0:
            raise ModelError(f"horizon_years must be positive, got {self.horizon_years}")
        if not self.dt_hours > 0.0:
            raise ModelError(f"dt_hours must be positive, got {self.dt_hours}")
        if self.c_grid_inject > self.c_grid_withdraw:
            logger.warning("Injection remuneration exceeds the withdrawal price; "
                           "the model can profit from simultaneous injection and withdrawal")


@dataclass(frozen=True)
class LossParams:
    """Loss parameters per component. ``None`` marks an ideal, lossless component."""
    pv_dcdc: Optional[ConverterLossParams] = loss_models.DEFAULT_PV_DCDC
    battery_dcdc: Optional[ConverterLossParams] = loss_models.DEFAULT_BATTERY_DCDC
    inverter: Optional[ConverterLossParams] = loss_models.DEFAULT_INVERTER
    battery_cell: Optional[BatteryLossParams] = loss_models.DEFAULT_BATTERY_CELL

    @classmethod
    def lossless(cls) -> "LossParams":
        return cls(pv_dcdc=None, battery_dcdc=None, inverter=None, battery_cell=None)


@dataclass(frozen=True)
class FormulationSpec:
    """
    Which loss model each component family uses.

    ``eta`` optionally pins the constant efficiency of a component (keys ``pv_dcdc``,
    ``battery_dcdc``, ``inverter``, ``battery_cell``) for linear variants; otherwise it is
    derived from the quadratic model according to ``linear_efficiency_basis``.
    """
    converter_model: str = CONVEX
    battery_model: str = CONVEX
    linear_efficiency_basis: str = BEST_POINT
    eta: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for model in (self.converter_model, self.battery_model):
            if model not in (CONVEX, LINEAR):
                raise ModelError(f"unknown loss model {model!r}, expected convex or linear")
        if self.linear_efficiency_basis not in (BEST_POINT, RATED):
            raise ModelError(f"unknown efficiency basis {self.linear_efficiency_basis!r}")
        for component, value in self.eta.items():
            if value is not None:
                LinearEfficiency(value)

    @property
    def label(self) -> str:
        converter = "CC" if self.converter_model == CONVEX else "LC"
        battery = "CB" if self.battery_model == CONVEX else "LB"
        return f"{converter}-{battery}"

    @classmethod
    def from_label(cls, label: str, linear_efficiency_basis: str = BEST_POINT,
                   eta: Optional[Dict[str, float]] = None) -> "FormulationSpec":
        if label not in FORMULATION_LABELS:
            raise ModelError(f"unknown formulation {label!r}, expected one of {FORMULATION_LABELS}")
        converter, battery = label.split("-")
        return cls(converter_model=CONVEX if converter == "CC" else LINEAR,
                   battery_model=CONVEX if battery == "CB" else LINEAR,
                   linear_efficiency_basis=linear_efficiency_basis,
                   eta=dict(eta or {}))


@dataclass(frozen=True)
class Sizing:
    """Component sizes: PV in kWp, battery in kWh, converters in kVA."""
    pv_wp: float = 0.0
    e_b_nom: float = 0.0
    p_pv_nom: float = 0.0
    p_b_nom: float = 0.0
    p_inv_nom: float = 0.0

    def __post_init__(self) -> None:
        for name in SIZING_FIELDS:
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ModelError(f"sizing {name} must be a non-negative number, got {value}")

    def to_dict(self) -> Dict[str, float]:
        return {name: float(getattr(self, name)) for name in SIZING_FIELDS}

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in SIZING_FIELDS])


@dataclass(frozen=True)
class SolverSettings:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iter: int = 200
    cap_epsilon: float = 1e-6
    grid_exchange_weight: float = 1e-4


@dataclass(frozen=True)
class VerificationSettings:
    slack_tol_rel: float = 1e-4
    complementarity_tol: float = 1e-6
    slack_floor_kw: float = 1e-3


@dataclass(frozen=True)
class Scenario:
    """Everything one optimization run needs."""
    load: Profile
    pv: Profile
    costs: CostParams = field(default_factory=CostParams)
    losses: LossParams = field(default_factory=LossParams)
    formulation: FormulationSpec = field(default_factory=FormulationSpec)
    solver: SolverSettings = field(default_factory=SolverSettings)
    verification: VerificationSettings = field(default_factory=VerificationSettings)

    def __post_init__(self) -> None:
        align_profiles(self.load, self.pv)
        if not math.isclose(self.costs.dt_hours, self.load.dt_hours, rel_tol=1e-12):
            object.__setattr__(self, 'costs', replace(self.costs, dt_hours=self.load.dt_hours))

    @property
    def n_steps(self) -> int:
        return len(self.load)

    @property
    def dt_hours(self) -> float:
        return self.load.dt_hours

    @property
    def load_kw(self) -> np.ndarray:
        return self.load.values / W_PER_KW

    @property
    def pv_availability(self) -> np.ndarray:
        return np.asarray(self.pv.values)

    @property
    def operation_weight(self) -> float:
        """Multiplier of the per-profile grid cost: the horizon, annualized if requested."""
        weight = self.costs.horizon_years
        if self.costs.annualize:
            weight *= HOURS_PER_YEAR / (self.n_steps * self.dt_hours)
        return weight

    def with_formulation(self, formulation: FormulationSpec) -> "Scenario":
        return replace(self, formulation=formulation)


@dataclass(frozen=True)
class SiteModel:
    """
    One loss site: a component loss booked on one or more flows.

    Exactly one of ``params`` (quadratic model, relaxed by rotated cones) and ``eta``
    (constant efficiency) is set.
    """
    name: str
    component: str
    kind: str
    flows: Tuple[str, ...]
    rating: str
    standby: bool
    params: Optional[Union[ConverterLossParams, BatteryLossParams]] = None
    eta: Optional[LinearEfficiency] = None

    @property
    def convex(self) -> bool:
        return self.params is not None

    def evaluate(self, flows: Dict[str, np.ndarray], rating: float) -> np.ndarray:
        """Loss of this site under its own model for given flows and component rating."""
        arrays = [np.clip(np.asarray(flows[name], dtype=float), 0.0, None) for name in self.flows]
        if not self.convex:
            return loss_models.converter_loss_linear(np.sum(arrays, axis=0), self.eta)
        if rating <= ZERO_RATING:
            return np.zeros_like(arrays[0])
        if self.kind == "battery":
            return loss_models.battery_loss_exact(arrays[0], rating, self.params)
        total = np.zeros_like(arrays[0])
        for i, flow in enumerate(arrays):
            total = total + loss_models.converter_loss_exact(
                flow, rating, self.params, standby=self.standby and i == 0)
        return total


# (site, component, kind, flows, rating, carries standby)
LOSS_SITES = (
    ("pv_dcdc", "pv_dcdc", "converter", ("ppvi",), "p_pv_nom", True),
    ("battery_dcdc_charge", "battery_dcdc", "converter", ("pc",), "p_b_nom", True),
    ("battery_dcdc_discharge", "battery_dcdc", "converter", ("pd",), "p_b_nom", False),
    ("inverter", "inverter", "converter", ("p_inv_pos", "p_inv_neg"), "p_inv_nom", True),
    ("battery_cell_charge", "battery_cell", "battery", ("pc",), "e_b_nom", False),
    ("battery_cell_discharge", "battery_cell", "battery", ("pd",), "e_b_nom", False),
)
SITE_NAMES = tuple(site[0] for site in LOSS_SITES)


def linear_efficiency(params: Union[ConverterLossParams, BatteryLossParams, None],
                      basis: str = BEST_POINT) -> LinearEfficiency:
    """Constant efficiency standing in for a quadratic model; 1 for ideal components."""
    if params is None:
        return LinearEfficiency(1.0)
    if basis == RATED:
        return loss_models.rated_efficiency(params)
    return loss_models.best_point_efficiency(params)


def resolve_loss_sites(losses: LossParams, form: FormulationSpec) -> Tuple[SiteModel, ...]:
    """Bind every loss site to its model under ``form``."""
    sites = []
    for name, component, kind, flows, rating, standby in LOSS_SITES:
        params = getattr(losses, component)
        model = form.converter_model if kind == "converter" else form.battery_model
        common = dict(name=name, component=component, kind=kind, flows=flows,
                      rating=rating, standby=standby)
        if params is not None and model == CONVEX:
            sites.append(SiteModel(params=params, **common))
            continue
        pinned = form.eta.get(component)
        eta = LinearEfficiency(pinned) if pinned is not None and params is not None \
            else linear_efficiency(params, form.linear_efficiency_basis)
        sites.append(SiteModel(eta=eta, **common))
    return tuple(sites)


@dataclass
class SiteVars:
    lin: np.ndarray
    quad: Tuple[np.ndarray, ...]


@dataclass
class VariableMap:
    """Program variable indices per quantity and timestep."""
    n_steps: int
    dt_hours: float
    load_kw: np.ndarray
    pv_availability: np.ndarray
    operation_weight: float
    flows: Dict[str, np.ndarray]
    sites: Dict[str, SiteVars]
    sizing: Dict[str, int]
    site_models: Tuple[SiteModel, ...]
    mode: str
    cap_row: Optional[int] = None

    def all_indices(self) -> np.ndarray:
        parts = list(self.flows.values()) + [np.array(list(self.sizing.values()))]
        for site in self.sites.values():
            parts.append(site.lin)
            parts.extend(site.quad)
        return np.concatenate(parts)


@dataclass
class SiteLosses:
    """Per-timestep loss of one site in kW. ``lin``/``quad`` are unknown for re-read schedules."""
    total: np.ndarray
    lin: Optional[np.ndarray] = None
    quad: Optional[np.ndarray] = None


@dataclass
class OperationSchedule:
    """Per-timestep flows in kW, battery energy in kWh."""
    pc: np.ndarray
    pd: np.ndarray
    ppv: np.ndarray
    ppvi: np.ndarray
    p_alpha: np.ndarray
    p_beta: np.ndarray
    p_gamma: np.ndarray
    p_inv: np.ndarray
    p_inv_pos: np.ndarray
    p_inv_neg: np.ndarray
    p_gi: np.ndarray
    p_gw: np.ndarray
    eb: np.ndarray
    load: np.ndarray
    dt_hours: float
    losses: Dict[str, SiteLosses]

    CSV_COLUMNS = (("pc", "pc_kw"), ("pd", "pd_kw"), ("ppv", "ppv_kw"), ("ppvi", "ppvi_kw"),
                   ("p_alpha", "p_alpha_kw"), ("p_beta", "p_beta_kw"), ("p_gamma", "p_gamma_kw"),
                   ("p_inv", "p_inv_kw"), ("p_gi", "p_gi_kw"), ("p_gw", "p_gw_kw"),
                   ("eb", "eb_kwh"))

    def __len__(self) -> int:
        return int(self.pc.size)

    def flow_dict(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in FLOW_NAMES}

    def total_loss(self) -> np.ndarray:
        return np.sum([site.total for site in self.losses.values()], axis=0)

    def to_frame(self) -> pd.DataFrame:
        """Tabular form: t_index, flows, one total-loss column per site, inverter split."""
        columns = {"t_index": np.arange(len(self))}
        for attr, column in self.CSV_COLUMNS:
            columns[column] = getattr(self, attr)
        for name in SITE_NAMES:
            columns[f"loss_{name}_kw"] = self.losses[name].total
        columns["p_inv_pos_kw"] = self.p_inv_pos
        columns["p_inv_neg_kw"] = self.p_inv_neg
        return pd.DataFrame(columns)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, dt_hours: float) -> "OperationSchedule":
        """Rebuild a schedule from :meth:`to_frame` output; load is closed from the grid balance."""
        missing = [c for _, c in cls.CSV_COLUMNS if c not in frame.columns]
        missing += [f"loss_{n}_kw" for n in SITE_NAMES if f"loss_{n}_kw" not in frame.columns]
        if missing:
            raise ModelError(f"schedule is missing columns: {', '.join(missing)}")
        values = {attr: frame[column].to_numpy(dtype=float) for attr, column in cls.CSV_COLUMNS}
        if "p_inv_pos_kw" in frame.columns and "p_inv_neg_kw" in frame.columns:
            values["p_inv_pos"] = frame["p_inv_pos_kw"].to_numpy(dtype=float)
            values["p_inv_neg"] = frame["p_inv_neg_kw"].to_numpy(dtype=float)
        else:
            values["p_inv_pos"] = np.clip(values["p_inv"], 0.0, None)
            values["p_inv_neg"] = np.clip(-values["p_inv"], 0.0, None)
        values["load"] = values["p_inv"] - values["p_gi"] + values["p_gw"]
        losses = {name: SiteLosses(total=frame[f"loss_{name}_kw"].to_numpy(dtype=float))
                  for name in SITE_NAMES}
        return cls(dt_hours=dt_hours, losses=losses, **values)


def _add_rows(prog: ConicProgram, terms: List[Tuple[np.ndarray, Union[float, np.ndarray]]],
              sense: Sense, rhs: Union[float, np.ndarray], n: int) -> np.ndarray:
    """Add ``n`` rows, one per timestep, each with one term per entry of ``terms``."""
    cols = np.column_stack([np.broadcast_to(index, (n,)) for index, _ in terms])
    vals = np.column_stack([np.broadcast_to(np.asarray(coef, dtype=float), (n,)) for _, coef in terms])
    return prog.add_linear_rows(cols, vals, sense, np.broadcast_to(np.asarray(rhs, dtype=float), (n,)))


def _loss_terms(site: SiteVars, sign: float) -> List[Tuple[np.ndarray, float]]:
    return [(site.lin, sign)] + [(quad, sign) for quad in site.quad]


def _build(scenario: Scenario, fixed_sizing: Optional[Sizing], loss_objective: bool,
           objective_cap: float) -> Tuple[ConicProgram, VariableMap]:
    n = scenario.n_steps
    dt = scenario.dt_hours
    costs = scenario.costs
    weight = scenario.operation_weight
    load_kw = scenario.load_kw
    g = scenario.pv_availability
    site_models = resolve_loss_sites(scenario.losses, scenario.formulation)
    mode = "operation" if loss_objective else "sizing"

    prog = ConicProgram(name=f"{scenario.formulation.label} {mode} ({n} steps)")

    sizing = {}
    for name in SIZING_FIELDS:
        if fixed_sizing is None:
            sizing[name] = prog.add_variable(0.0, np.inf)
        else:
            value = getattr(fixed_sizing, name)
            sizing[name] = prog.add_variable(value, value)

    flows = {}
    for name in FLOW_NAMES:
        signed = name in ("p_alpha", "p_beta", "p_gamma")
        flows[name] = prog.add_variables(n, -np.inf if signed else 0.0, np.inf)

    # ratings
    for flow, rating in (("pc", "p_b_nom"), ("pd", "p_b_nom"), ("ppvi", "p_pv_nom"),
                         ("p_inv_pos", "p_inv_nom"), ("p_inv_neg", "p_inv_nom"),
                         ("eb", "e_b_nom")):
        _add_rows(prog, [(flows[flow], 1.0), (sizing[rating], -1.0)], Sense.LE, 0.0, n)

    # PV availability and curtailment
    _add_rows(prog, [(flows["ppv"], 1.0), (sizing["pv_wp"], -g)], Sense.EQ, 0.0, n)
    _add_rows(prog, [(flows["ppvi"], 1.0), (flows["ppv"], -1.0)], Sense.LE, 0.0, n)

    sites: Dict[str, SiteVars] = {}
    for model in site_models:
        lin = prog.add_variables(n, 0.0, np.inf)
        flow_terms = [(flows[name], 1.0) for name in model.flows]
        quad: List[np.ndarray] = []
        if not model.convex:
            _add_rows(prog, [(lin, 1.0)] + [(idx, -(1.0 - model.eta.eta)) for idx, _ in flow_terms],
                      Sense.EQ, 0.0, n)
        elif model.kind == "battery":
            _add_rows(prog, [(lin, 1.0), (flow_terms[0][0], -model.params.lam)], Sense.EQ, 0.0, n)
            q = prog.add_variables(n, 0.0, np.inf)
            prog.add_rsoc_rows(q, np.full(n, sizing[model.rating]), flow_terms[0][0],
                               math.sqrt(model.params.gamma))
            quad.append(q)
        else:
            terms = [(lin, 1.0)] + [(idx, -model.params.b) for idx, _ in flow_terms]
            if model.standby:
                terms.append((sizing[model.rating], -model.params.a_tilde))
            _add_rows(prog, terms, Sense.EQ, 0.0, n)
            for idx, _ in flow_terms:
                q = prog.add_variables(n, 0.0, np.inf)
                prog.add_rsoc_rows(q, np.full(n, sizing[model.rating]), idx,
                                   math.sqrt(model.params.c_tilde))
                quad.append(q)
        sites[model.name] = SiteVars(lin=lin, quad=tuple(quad))

    # power balances, PV branch to grid connection
    _add_rows(prog, [(flows["ppvi"], 1.0), (flows["p_beta"], -1.0)] + _loss_terms(sites["pv_dcdc"], -1.0),
              Sense.EQ, 0.0, n)
    # battery branch: Pα = Pd − Pd_loss − Pc − Pc_loss
    _add_rows(prog, [(flows["pc"], 1.0), (flows["pd"], -1.0), (flows["p_alpha"], 1.0)]
              + _loss_terms(sites["battery_dcdc_charge"], 1.0)
              + _loss_terms(sites["battery_dcdc_discharge"], 1.0),
              Sense.EQ, 0.0, n)
    _add_rows(prog, [(flows["p_alpha"], 1.0), (flows["p_beta"], 1.0), (flows["p_gamma"], -1.0)],
              Sense.EQ, 0.0, n)
    _add_rows(prog, [(flows["p_gamma"], 1.0), (flows["p_inv_pos"], -1.0), (flows["p_inv_neg"], 1.0)]
              + _loss_terms(sites["inverter"], -1.0),
              Sense.EQ, 0.0, n)
    _add_rows(prog, [(flows["p_inv_pos"], 1.0), (flows["p_inv_neg"], -1.0),
                     (flows["p_gi"], -1.0), (flows["p_gw"], 1.0)],
              Sense.EQ, load_kw, n)

    # battery energy, cyclic: E_0 = E_N
    eb = flows["eb"]
    _add_rows(prog, [(eb, 1.0), (np.roll(eb, 1), -1.0), (flows["pc"], -dt), (flows["pd"], dt)]
              + [(idx, dt) for idx, _ in _loss_terms(sites["battery_cell_charge"], 1.0)]
              + [(idx, dt) for idx, _ in _loss_terms(sites["battery_cell_discharge"], 1.0)],
              Sense.EQ, 0.0, n)

    grid_coef = dt * weight / EUR_PER_KEUR
    cost_terms = [
        (flows["p_gi"], np.full(n, -costs.c_grid_inject * grid_coef)),
        (flows["p_gw"], np.full(n, costs.c_grid_withdraw * grid_coef)),
        (np.array([sizing["pv_wp"]]), np.array([costs.c_pv / EUR_PER_KEUR])),
        (np.array([sizing["e_b_nom"]]), np.array([costs.c_battery / EUR_PER_KEUR])),
        (np.array([sizing["p_pv_nom"]]), np.array([costs.c_dcdc / EUR_PER_KEUR])),
        (np.array([sizing["p_b_nom"]]), np.array([costs.c_dcdc / EUR_PER_KEUR])),
        (np.array([sizing["p_inv_nom"]]), np.array([costs.c_inv / EUR_PER_KEUR])),
    ]

    cap_row = None
    if loss_objective:
        for site in sites.values():
            prog.add_objective_terms(site.lin, dt)
            for q in site.quad:
                prog.add_objective_terms(q, dt)
        exchange = scenario.solver.grid_exchange_weight * dt
        if exchange:
            prog.add_objective_terms(flows["p_gi"], exchange)
            prog.add_objective_terms(flows["p_gw"], exchange)
        if math.isfinite(objective_cap):
            cols = np.concatenate([index for index, _ in cost_terms]).reshape(1, -1)
            vals = np.concatenate([coef for _, coef in cost_terms]).reshape(1, -1)
            cap_row = int(prog.add_linear_rows(cols, vals, Sense.LE,
                                               [objective_cap / EUR_PER_KEUR])[0])
    else:
        for index, coef in cost_terms:
            prog.add_objective_terms(index, coef)

    vmap = VariableMap(n_steps=n, dt_hours=dt, load_kw=load_kw, pv_availability=g,
                       operation_weight=weight, flows=flows, sites=sites, sizing=sizing,
                       site_models=site_models, mode=mode, cap_row=cap_row)
    logger.debug(f"Built {prog.name}: {prog.num_vars} variables, {prog.num_rows} rows, "
                 f"{prog.num_cones} cones")
    return prog, vmap


def build_sizing_program(scenario: Scenario,
                         fixed_sizing: Optional[Sizing] = None) -> Tuple[ConicProgram, VariableMap]:
    """
    Build the cost-minimizing program.

    Args:
        scenario (Scenario): Profiles, costs, losses and formulation.
        fixed_sizing (Sizing, optional): Pin the component sizes and optimize operation only.

    Returns:
        Tuple[ConicProgram, VariableMap]: The program (objective in k€) and its variable map.
    """
    return _build(scenario, fixed_sizing, loss_objective=False, objective_cap=math.inf)


def build_operation_program(scenario: Scenario, sizing: Sizing,
                            objective_cap: float = math.inf) -> Tuple[ConicProgram, VariableMap]:
    """
    Build the loss-minimizing program for a fixed sizing.

    The objective is the total loss energy (kWh) of all sites, plus a small weight on grid
    exchange. ``objective_cap`` (€) bounds the total cost of ownership; an infinite cap
    leaves pure loss minimization.
    """
    if math.isnan(objective_cap):
        raise ModelError("objective cap must be a number")
    return _build(scenario, sizing, loss_objective=True, objective_cap=objective_cap)


def extract_sizing(sol: ConicSolution, vmap: VariableMap) -> Sizing:
    """Component sizes of an optimal solution; solver noise below zero is clipped."""
    if not sol.is_optimal:
        raise ModelError(f"cannot extract sizing from a {sol.status.value} solution")
    values = {name: max(0.0, float(sol.var_values[index])) for name, index in vmap.sizing.items()}
    return Sizing(**values)


def extract_schedule(sol: ConicSolution, vmap: VariableMap) -> OperationSchedule:
    """
    Per-timestep flows and losses of an optimal solution.

    Raises:
        ModelError: If the solution is not optimal.
    """
    if not sol.is_optimal:
        raise ModelError(f"cannot extract a schedule from a {sol.status.value} solution")
    x = sol.var_values
    flows = {name: x[index].copy() for name, index in vmap.flows.items()}
    # net simultaneous injection and withdrawal; the grid balance only sees the difference
    overlap = np.clip(np.minimum(flows["p_gi"], flows["p_gw"]), 0.0, None)
    flows["p_gi"] -= overlap
    flows["p_gw"] -= overlap
    losses = {}
    for name, site in vmap.sites.items():
        lin = x[site.lin].copy()
        quad = np.sum([x[q] for q in site.quad], axis=0) if site.quad else np.zeros(vmap.n_steps)
        losses[name] = SiteLosses(total=lin + quad, lin=lin, quad=quad)
    return OperationSchedule(p_inv=flows["p_inv_pos"] - flows["p_inv_neg"],
                             load=vmap.load_kw.copy(), dt_hours=vmap.dt_hours,
                             losses=losses, **flows)


def tco(schedule: OperationSchedule, sizing: Sizing, costs: CostParams,
        operation_weight: float) -> float:
    """Total cost of ownership in €: weighted grid exchange cost plus investment."""
    grid = np.sum(costs.c_grid_withdraw * schedule.p_gw - costs.c_grid_inject * schedule.p_gi)
    return float(grid * schedule.dt_hours * operation_weight + capex(sizing, costs))


def capex(sizing: Sizing, costs: CostParams) -> float:
    """Investment cost in €."""
    return (costs.c_pv * sizing.pv_wp + costs.c_battery * sizing.e_b_nom
            + costs.c_dcdc * (sizing.p_pv_nom + sizing.p_b_nom) + costs.c_inv * sizing.p_inv_nom)


def balance_residuals(schedule: OperationSchedule) -> Dict[str, float]:
    """Largest absolute residual (kW, kWh for the battery) of each balance equation."""
    loss = {name: site.total for name, site in schedule.losses.items()}
    s = schedule
    dt = s.dt_hours
    residuals = {
        "pv_branch": s.ppvi - loss["pv_dcdc"] - s.p_beta,
        "battery_branch": s.pc + loss["battery_dcdc_charge"] - (s.pd - loss["battery_dcdc_discharge"]) + s.p_alpha,
        "dc_bus": s.p_alpha + s.p_beta - s.p_gamma,
        "inverter": s.p_gamma - s.p_inv - loss["inverter"],
        "grid": s.p_inv - s.load - s.p_gi + s.p_gw,
        "battery_energy": s.eb - np.roll(s.eb, 1)
        - (s.pc - loss["battery_cell_charge"]) * dt + (s.pd + loss["battery_cell_discharge"]) * dt,
    }
    return {name: float(np.max(np.abs(value))) for name, value in residuals.items()}
