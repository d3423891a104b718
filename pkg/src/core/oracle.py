"""
Brute-force operation oracle for PVBat-Sizer.

For tiny scenarios the cheapest operation of a fixed sizing is found by exhaustive search
over a grid of battery energy levels and PV curtailment levels, with the exact quadratic
losses applied and grid exchange closed by the balances. The search is a dynamic program
over the cyclic horizon; it visits the same control sequences as plain enumeration.
"""

import math
import logging
from typing import Optional

import numpy as np

from src.core.loss_models import BatteryLossParams, ConverterLossParams
from src.core.system_model import Scenario, Sizing, capex

logger = logging.getLogger(__name__)

MAX_STEPS = 8
MIN_GRID_STEPS = 2
MAX_GRID_STEPS = 21
LOSS_CHAIN_FACTOR = 2.0
ZERO_POWER = 1e-12


class OracleError(ValueError):
    """Raised when an instance exceeds the oracle's complexity guard."""


def _check_guard(scenario: Scenario, grid_steps: int) -> None:
    if scenario.n_steps > MAX_STEPS:
        raise OracleError(f"oracle handles at most {MAX_STEPS} steps, got {scenario.n_steps}")
    if not MIN_GRID_STEPS <= grid_steps <= MAX_GRID_STEPS:
        raise OracleError(f"grid_steps must lie in [{MIN_GRID_STEPS}, {MAX_GRID_STEPS}], got {grid_steps}")


def _converter_loss(p: np.ndarray, p_nom: float, params: Optional[ConverterLossParams],
                    standby: bool) -> np.ndarray:
    if params is None or p_nom <= 0.0:
        return np.zeros_like(p)
    loss = params.b * p + params.c_tilde * p ** 2 / p_nom
    return loss + p_nom * params.a_tilde if standby else loss


def _smaller_root(k2: float, k1: float, k0: np.ndarray) -> np.ndarray:
    """Smallest non-negative root of ``k2·x² - k1·x + k0 = 0`` (NaN if none), k1 > 0, k0 >= 0."""
    if k2 == 0.0:
        return k0 / k1
    disc = k1 ** 2 - 4.0 * k2 * k0
    with np.errstate(invalid='ignore'):
        root = 2.0 * k0 / (k1 + np.sqrt(disc))
    return np.where(disc >= 0.0, root, np.nan)


def _positive_root(k2: float, k1: float, k0: np.ndarray) -> np.ndarray:
    """Non-negative root of ``k2·x² + k1·x - k0 = 0`` for k0 >= 0, k1 > 0."""
    if k2 == 0.0:
        return k0 / k1
    return 2.0 * k0 / (k1 + np.sqrt(k1 ** 2 + 4.0 * k2 * k0))


def _battery_terminal_power(delta_e: np.ndarray, dt: float, e_nom: float,
                            cell: Optional[BatteryLossParams]):
    """Charge and discharge power realizing an energy change over one step (NaN if impossible)."""
    rate = delta_e / dt
    charge_rate = np.clip(rate, 0.0, None)
    discharge_rate = np.clip(-rate, 0.0, None)
    if cell is None or e_nom <= 0.0:
        return charge_rate, discharge_rate
    k2 = cell.gamma / e_nom
    pc = _smaller_root(k2, 1.0 - cell.lam, charge_rate)
    pd = _positive_root(k2, 1.0 + cell.lam, discharge_rate)
    return pc, pd


def _inverter_output(p_gamma: np.ndarray, p_nom: float,
                     params: Optional[ConverterLossParams]) -> np.ndarray:
    """AC-side inverter power for a DC-side power ``p_gamma`` (NaN when out of range)."""
    if p_nom <= 0.0:
        return np.where(np.abs(p_gamma) <= ZERO_POWER, 0.0, np.nan)
    if params is None:
        p_inv = p_gamma
    else:
        k2 = params.c_tilde / p_nom
        surplus = p_gamma - p_nom * params.a_tilde
        export = _positive_root(k2, 1.0 + params.b, np.clip(surplus, 0.0, None))
        imported = _smaller_root(k2, 1.0 - params.b, np.clip(-surplus, 0.0, None))
        p_inv = np.where(surplus >= 0.0, export, -imported)
    return np.where(np.abs(p_inv) <= p_nom * (1.0 + 1e-9), p_inv, np.nan)


def _step_costs(scenario: Scenario, sizing: Sizing, t: int, levels: np.ndarray,
                grid_steps: int) -> np.ndarray:
    """Cheapest cost of moving from energy level i to level j at step t, over curtailment."""
    losses = scenario.losses
    costs = scenario.costs
    dt = scenario.dt_hours
    weight = scenario.operation_weight
    load = scenario.load_kw[t]

    pc, pd = _battery_terminal_power(levels[None, :] - levels[:, None], dt, sizing.e_b_nom,
                                     losses.battery_cell)
    feasible = np.isfinite(pc) & np.isfinite(pd)
    feasible &= (pc <= sizing.p_b_nom * (1.0 + 1e-9)) & (pd <= sizing.p_b_nom * (1.0 + 1e-9))
    pc, pd = np.nan_to_num(pc), np.nan_to_num(pd)
    p_alpha = (pd - _converter_loss(pd, sizing.p_b_nom, losses.battery_dcdc, standby=False)
               - pc - _converter_loss(pc, sizing.p_b_nom, losses.battery_dcdc, standby=True))

    available = min(scenario.pv_availability[t] * sizing.pv_wp, sizing.p_pv_nom)
    ppvi = np.linspace(0.0, available, grid_steps) if available > 0.0 else np.zeros(1)
    p_beta = ppvi - _converter_loss(ppvi, sizing.p_pv_nom, losses.pv_dcdc, standby=True)

    p_gamma = p_alpha[:, :, None] + p_beta[None, None, :]
    p_inv = _inverter_output(p_gamma, sizing.p_inv_nom, losses.inverter)
    net = p_inv - load
    step = (costs.c_grid_withdraw * np.clip(-net, 0.0, None)
            - costs.c_grid_inject * np.clip(net, 0.0, None)) * dt * weight
    step = np.where(np.isfinite(step), step, np.inf)
    best = step.min(axis=2)
    return np.where(feasible, best, np.inf)


def brute_force_operation(sizing: Sizing, scenario: Scenario, grid_steps: int = 11) -> float:
    """
    Cheapest total cost of ownership in € found on a control grid for a fixed sizing.

    Battery energy moves between ``grid_steps`` evenly spaced levels in ``[0, e_b_nom]``,
    including both ends, with the cyclic condition ``E_0 = E_N``; PV output takes
    ``grid_steps`` evenly spaced levels between 0 and its available maximum.

    Args:
        sizing (Sizing): Fixed component sizes.
        scenario (Scenario): A scenario of at most 8 steps; the formulation is ignored.
        grid_steps (int): Levels per control, 2 to 21.

    Returns:
        float: Operational cost over the horizon plus investment cost.

    Raises:
        OracleError: If the instance exceeds the complexity guard or no grid schedule is feasible.
    """
    _check_guard(scenario, grid_steps)
    levels = np.linspace(0.0, sizing.e_b_nom, grid_steps) if sizing.e_b_nom > 0.0 else np.zeros(1)
    n_levels = levels.size

    # value[s, j]: cheapest cost from start level s to current level j
    value = np.full((n_levels, n_levels), np.inf)
    np.fill_diagonal(value, 0.0)
    for t in range(scenario.n_steps):
        step = _step_costs(scenario, sizing, t, levels, grid_steps)
        value = np.min(value[:, :, None] + step[None, :, :], axis=1)

    best = float(np.min(np.diag(value)))
    if not math.isfinite(best):
        raise OracleError("no feasible schedule on the oracle grid")
    total = best + capex(sizing, scenario.costs)
    logger.debug(f"Oracle on {scenario.n_steps} steps, {grid_steps} levels: {total:.6f} €")
    return total


def discretization_bound(sizing: Sizing, scenario: Scenario, grid_steps: int = 11) -> float:
    """
    Upper bound in € on how far the oracle's cost can exceed the continuous optimum.

    Rounding the optimal energy trajectory to the grid moves each step's battery energy by at
    most one level, and rounding PV output down moves it by at most one level; each kWh moved
    costs at most the dearer grid price times a loss-chain factor of 2. Assumes battery and
    inverter power limits do not bind at the continuous optimum.
    """
    _check_guard(scenario, grid_steps)
    h_energy = sizing.e_b_nom / (grid_steps - 1)
    available = np.minimum(scenario.pv_availability * sizing.pv_wp, sizing.p_pv_nom)
    h_pv = float(np.max(available)) / (grid_steps - 1) if available.size else 0.0
    price = max(scenario.costs.c_grid_withdraw, scenario.costs.c_grid_inject)
    return (scenario.n_steps * LOSS_CHAIN_FACTOR * price * scenario.operation_weight
            * (h_energy + h_pv * scenario.dt_hours))
