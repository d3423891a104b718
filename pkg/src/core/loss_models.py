"""
Loss model module for PVBat-Sizer.

This module provides the battery and converter loss models:
- Battery efficiency fitting over C-rate and the derived linear/quadratic loss coefficients
- Converter loss coefficients rescaled to an arbitrary power rating
- Exact (quadratic) and constant-efficiency loss evaluation
- The constant efficiencies used by the linear formulation variants

All evaluators accept scalars or numpy arrays. Power and energy units only need to be
consistent (W with Wh, or kW with kWh); every coefficient is either dimensionless or in hours.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Iterable, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Overshoot of a converter rating tolerated silently when re-evaluating solver output.
RATING_OVERSHOOT_TOL = 1e-3


class LossModelError(ValueError):
    """Raised for invalid loss parameters or undefined operating points."""


@dataclass(frozen=True)
class BatteryLossParams:
    """
    Battery cell loss model ``loss = lambda·P + gamma·P²/E_nom``.

    ``lambda`` and ``gamma`` follow from the efficiency fit ``eta = alpha + beta·C``;
    build instances through :func:`derive_battery_loss_params`.
    """
    alpha: float
    beta: float
    ts_hours: float = 1.0
    lam: float = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise LossModelError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.beta < 0.0:
            raise LossModelError(
                f"beta must be negative (quadratic loss would be non-positive), got {self.beta}"
            )
        if not self.ts_hours > 0.0:
            raise LossModelError(f"ts_hours must be positive, got {self.ts_hours}")
        object.__setattr__(self, 'lam', 1.0 - self.alpha)
        object.__setattr__(self, 'gamma', -self.beta * self.ts_hours)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "ts_hours": self.ts_hours}


@dataclass(frozen=True)
class ConverterLossParams:
    """
    Converter loss model fitted at rating ``p_nom_og``: ``loss = a + b·P + c·P²``.

    ``a_tilde`` and ``c_tilde`` rescale the model to any rating ``P_nom`` as
    ``P_nom·a_tilde + b·P + c_tilde·P²/P_nom``.
    """
    a: float
    b: float
    c: float
    p_nom_og: float
    a_tilde: float = field(init=False)
    c_tilde: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.p_nom_og > 0.0:
            raise LossModelError(f"p_nom_og must be positive, got {self.p_nom_og}")
        if self.a < 0.0:
            raise LossModelError(f"a must be non-negative, got {self.a}")
        if not (0.0 <= self.b < 1.0):
            raise LossModelError(f"b must lie in [0, 1), got {self.b}")
        if not self.c > 0.0:
            raise LossModelError(f"c must be positive, got {self.c}")
        object.__setattr__(self, 'a_tilde', self.a / self.p_nom_og)
        object.__setattr__(self, 'c_tilde', self.c * self.p_nom_og)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "p_nom_og": self.p_nom_og}


@dataclass(frozen=True)
class LinearEfficiency:
    """Constant efficiency ``eta``; loss is ``(1 - eta)·P``."""
    eta: float

    def __post_init__(self) -> None:
        if not (0.0 < self.eta <= 1.0):
            raise LossModelError(f"eta must lie in (0, 1], got {self.eta}")


# Representative placeholders, not fitted to a particular product. Ratings in W.
DEFAULT_PV_DCDC = ConverterLossParams(a=15.0, b=0.02, c=2.0e-6, p_nom_og=5000.0)
DEFAULT_BATTERY_DCDC = ConverterLossParams(a=12.0, b=0.015, c=3.0e-6, p_nom_og=3000.0)
DEFAULT_INVERTER = ConverterLossParams(a=30.0, b=0.025, c=3.0e-6, p_nom_og=5000.0)
DEFAULT_BATTERY_CELL_FIT = (0.99, -0.03)


def fit_battery_efficiency(points: Iterable[Tuple[float, float]]) -> Tuple[float, float]:
    """
    Ordinary least squares fit of ``eta = alpha + beta·C``.

    Args:
        points: ``(c_rate, efficiency)`` pairs, C-rate in 1/h.

    Returns:
        Tuple[float, float]: ``(alpha, beta)``.

    Raises:
        LossModelError: With fewer than two distinct C-rates or efficiencies outside (0, 1].
    """
    data = np.asarray(list(points), dtype=float).reshape(-1, 2)
    c_rate, eta = data[:, 0], data[:, 1]
    if np.unique(c_rate).size < 2:
        raise LossModelError("insufficient distinct C-rates")
    if np.any(eta <= 0.0) or np.any(eta > 1.0):
        raise LossModelError("efficiencies must lie in (0, 1]")

    design = np.column_stack([np.ones_like(c_rate), c_rate])
    (alpha, beta), *_ = np.linalg.lstsq(design, eta, rcond=None)
    return float(alpha), float(beta)


def derive_battery_loss_params(alpha: float, beta: float, ts_hours: float) -> BatteryLossParams:
    """
    Turn an efficiency fit into loss coefficients: ``lambda = 1 - alpha``, ``gamma = -beta·ts``.

    Raises:
        LossModelError: If ``beta >= 0`` or ``alpha`` is outside (0, 1].
    """
    return BatteryLossParams(alpha=alpha, beta=beta, ts_hours=ts_hours)


DEFAULT_BATTERY_CELL = derive_battery_loss_params(*DEFAULT_BATTERY_CELL_FIT, ts_hours=1.0)


def battery_loss_exact(p: ArrayLike, e_nom: float, params: BatteryLossParams) -> ArrayLike:
    """
    Battery cell loss ``lambda·p + gamma·p²/e_nom`` for a charge or discharge power.

    Raises:
        LossModelError: If ``e_nom <= 0``.
    """
    if not e_nom > 0.0:
        raise LossModelError(f"rated energy must be positive, got {e_nom}")
    p = np.asarray(p, dtype=float)
    loss = params.lam * p + params.gamma * p ** 2 / e_nom
    return loss if loss.ndim else float(loss)


def converter_loss_exact(p: ArrayLike, p_nom: float, params: ConverterLossParams,
                         standby: bool = True) -> ArrayLike:
    """
    Converter loss ``p_nom·a_tilde + b·p + c_tilde·p²/p_nom``.

    A component of rating zero is absent and loses nothing at zero power.

    Args:
        p: Throughput power, non-negative.
        p_nom (float): Converter rating.
        params (ConverterLossParams): Loss coefficients.
        standby (bool): Include the constant ``p_nom·a_tilde`` term.

    Raises:
        LossModelError: If ``p_nom`` is negative, or zero while ``p`` is positive.
    """
    if p_nom < 0.0:
        raise LossModelError(f"converter rating must be non-negative, got {p_nom}")
    p = np.asarray(p, dtype=float)
    if p_nom == 0.0:
        if np.any(p > 0.0):
            raise LossModelError("converter of rating 0 cannot carry positive power")
        loss = np.zeros_like(p)
        return loss if loss.ndim else 0.0

    overshoot = float(np.max(p)) / p_nom - 1.0 if p.size else 0.0
    if overshoot > RATING_OVERSHOOT_TOL:
        logger.warning(f"converter power exceeds its rating {p_nom:g} by {overshoot:.2%}")

    loss = params.b * p + params.c_tilde * p ** 2 / p_nom
    if standby:
        loss = loss + p_nom * params.a_tilde
    return loss if loss.ndim else float(loss)


def converter_loss_linear(p: ArrayLike, eff: LinearEfficiency) -> ArrayLike:
    """Constant-efficiency converter loss ``(1 - eta)·p``."""
    loss = (1.0 - eff.eta) * np.asarray(p, dtype=float)
    return loss if loss.ndim else float(loss)


def battery_loss_linear(p: ArrayLike, eff: LinearEfficiency) -> ArrayLike:
    """Constant-efficiency battery loss ``(1 - eta)·p``."""
    return converter_loss_linear(p, eff)


def battery_efficiency(p: ArrayLike, e_nom: float, params: BatteryLossParams) -> ArrayLike:
    """Efficiency ``1 - loss/p`` of the battery cell at power ``p > 0``."""
    p = np.asarray(p, dtype=float)
    eta = 1.0 - battery_loss_exact(p, e_nom, params) / p
    return eta if np.ndim(eta) else float(eta)


def converter_efficiency(p: ArrayLike, p_nom: float, params: ConverterLossParams) -> ArrayLike:
    """Efficiency ``1 - loss/p`` of a converter at throughput ``p > 0``."""
    p = np.asarray(p, dtype=float)
    eta = 1.0 - converter_loss_exact(p, p_nom, params) / p
    return eta if np.ndim(eta) else float(eta)


def best_point_efficiency(params: Union[ConverterLossParams, BatteryLossParams]) -> LinearEfficiency:
    """
    Highest efficiency the model reaches within its rating.

    For a converter the loss per unit power ``a_tilde/r + b + c_tilde·r`` (``r = p/p_nom``)
    is smallest at ``r = sqrt(a_tilde/c_tilde)``, capped at 1. For the battery cell the
    efficiency falls with C-rate, so the best point is ``alpha``. A linear model using this
    efficiency never loses more than the quadratic model at the same operating point.
    """
    if isinstance(params, BatteryLossParams):
        return LinearEfficiency(params.alpha)
    r = min(1.0, math.sqrt(params.a_tilde / params.c_tilde))
    if r == 0.0:
        return LinearEfficiency(1.0 - params.b)
    return LinearEfficiency(1.0 - (params.a_tilde / r + params.b + params.c_tilde * r))


def rated_efficiency(params: Union[ConverterLossParams, BatteryLossParams]) -> LinearEfficiency:
    """Efficiency at rated power (converters) or at 1 C (battery cell)."""
    if isinstance(params, BatteryLossParams):
        return LinearEfficiency(params.alpha + params.beta)
    return LinearEfficiency(1.0 - (params.a_tilde + params.b + params.c_tilde))
