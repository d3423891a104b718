"""
Configuration module for PVBat-Sizer.

This module provides functions to manage scenario configuration:
- Default configuration values (reference costs, shipped loss parameters, tolerances)
- Load and save scenario files (YAML, JSON accepted)
- Deep merging of user files and command-line overrides over the defaults
- Conversion into the typed scenario used by the optimizer
"""

import os
import copy
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import yaml

from src.core import loss_models
from src.core.analysis import AnalysisError, AnalysisSettings
from src.core.loss_models import BatteryLossParams, ConverterLossParams, LossModelError
from src.core.profiles import (
    Profile,
    ProfileError,
    ProfileKind,
    load_profile_csv,
    resample_average,
    synthesize_profiles,
)
from src.core.system_model import (
    CostParams,
    FormulationSpec,
    LossParams,
    ModelError,
    Scenario,
    SolverSettings,
    VerificationSettings,
)

logger = logging.getLogger(__name__)

CONVERTER_SITES = ("pv_dcdc", "battery_dcdc", "inverter")


class ConfigError(ValueError):
    """Raised for unreadable or invalid scenario files."""


def get_default_config() -> Dict[str, Any]:
    """
    Get the default configuration values.

    Returns:
        Dict[str, Any]: Dictionary containing default configuration values.
    """
    return {
        "profiles": {
            "load_csv": None,
            "pv_csv": None,
            "dt_hours": 0.25,
            "resample_factor": 1,
            "synthetic": {
                "steps": 35040,
                "dt_hours": 0.25,
                "load_kwh": 2774.0,
                "pv_wh_per_wp": 1020.0,
                "start_day": 0,
                "seed": 0,
            },
        },
        "costs": {
            "c_pv": 750.0,
            "c_battery": 250.0,
            "c_dcdc": 130.0,
            "c_inv": 200.0,
            "c_grid_withdraw": 0.26,
            "c_grid_inject": 0.1,
            "horizon_years": 10.0,
            "annualize": False,
        },
        "losses": {
            "pv_dcdc": loss_models.DEFAULT_PV_DCDC.to_dict(),
            "battery_dcdc": loss_models.DEFAULT_BATTERY_DCDC.to_dict(),
            "inverter": loss_models.DEFAULT_INVERTER.to_dict(),
            "battery_cell": loss_models.DEFAULT_BATTERY_CELL.to_dict(),
        },
        "formulation": {
            "converter_model": "convex",
            "battery_model": "convex",
            "linear_efficiency_basis": "best_point",
            "eta": {"pv_dcdc": None, "battery_dcdc": None, "inverter": None, "battery_cell": None},
        },
        "solver": {
            "tol_feas": 1e-8,
            "tol_gap": 1e-8,
            "max_iter": 200,
            "cap_epsilon": 1e-6,
            "grid_exchange_weight": 1e-4,
        },
        "verification": {
            "slack_tol_rel": 1e-4,
            "complementarity_tol": 1e-6,
            "slack_floor_kw": 1e-3,
        },
        "analysis": {
            "pv_energy_basis": "ppv",
            "idle_threshold": 0.01,
        },
        "output_dir": "results",
    }


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    Recursively merge ``override`` into a copy of ``base``.

    A ``None`` override replaces a whole section; unknown keys are rejected.

    Raises:
        ConfigError: On keys that do not exist in ``base``.
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if key not in merged:
            raise ConfigError(f"unknown configuration key: {key}")
        if isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(config_file: str) -> Dict[str, Any]:
    """
    Load a scenario file and merge it over the defaults.

    Relative profile paths and the output directory resolve against the file's directory.

    Args:
        config_file (str): Path to the YAML (or JSON) scenario file.

    Returns:
        Dict[str, Any]: Dictionary containing configuration values.

    Raises:
        ConfigError: If the file is missing, unparseable or has unknown keys.
    """
    if not os.path.exists(config_file):
        raise ConfigError(f"config file not found: {config_file}")
    try:
        with open(config_file, 'r') as f:
            data = yaml.safe_load(f) or {}
    except (yaml.YAMLError, IOError) as e:
        raise ConfigError(f"could not read {config_file}: {str(e)}")
    if not isinstance(data, dict):
        raise ConfigError(f"{config_file} does not contain a mapping")

    config = merge_config(get_default_config(), data)
    base_dir = os.path.dirname(os.path.abspath(config_file))
    profiles = config["profiles"]
    for key in ("load_csv", "pv_csv"):
        if profiles[key] and not os.path.isabs(profiles[key]):
            profiles[key] = os.path.join(base_dir, profiles[key])
    if config["output_dir"] and not os.path.isabs(config["output_dir"]):
        config["output_dir"] = os.path.join(base_dir, config["output_dir"])
    return config


def save_config(config: Dict[str, Any], config_file: str) -> None:
    """
    Save configuration to a YAML file.

    Args:
        config (Dict[str, Any]): The configuration to save.
        config_file (str): Path to the configuration file.
    """
    with open(config_file, 'w') as f:
        yaml.safe_dump(config, f, default_flow_style=False, sort_keys=False)


def _section(config: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = config.get(name)
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return section


@dataclass
class ScenarioConfig:
    """Typed view of a merged configuration dictionary."""
    costs: CostParams
    losses: LossParams
    formulation: FormulationSpec
    solver: SolverSettings
    verification: VerificationSettings
    analysis: AnalysisSettings
    profiles: Dict[str, Any] = field(default_factory=dict)
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, config: Dict[str, Any]) -> "ScenarioConfig":
        """
        Validate a configuration dictionary.

        Raises:
            ConfigError: With the offending section named.
        """
        try:
            profiles = _section(config, "profiles")
            costs = dict(_section(config, "costs"))
            annualize = bool(costs.pop("annualize", False))
            cost_params = CostParams(dt_hours=float(profiles["dt_hours"]), annualize=annualize,
                                     **{k: float(v) for k, v in costs.items()})
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"invalid costs: {str(e)}")

        try:
            losses = _section(config, "losses")
            converters = {name: ConverterLossParams(**losses[name]) if losses.get(name) else None
                          for name in CONVERTER_SITES}
            cell = losses.get("battery_cell")
            loss_params = LossParams(
                battery_cell=BatteryLossParams(**cell) if cell else None, **converters)
        except (TypeError, LossModelError) as e:
            raise ConfigError(f"invalid losses: {str(e)}")

        try:
            form = dict(_section(config, "formulation"))
            eta = {k: float(v) for k, v in (form.pop("eta", None) or {}).items() if v is not None}
            formulation = FormulationSpec(eta=eta, **form)
            solver = SolverSettings(**_section(config, "solver"))
            verification = VerificationSettings(**_section(config, "verification"))
            analysis = AnalysisSettings(**_section(config, "analysis"))
        except (TypeError, ModelError, LossModelError, AnalysisError) as e:
            raise ConfigError(f"invalid settings: {str(e)}")

        return cls(costs=cost_params, losses=loss_params, formulation=formulation, solver=solver,
                   verification=verification, analysis=analysis, profiles=dict(profiles),
                   output_dir=config.get("output_dir") or "results")

    def load_profiles(self):
        """
        Read the profile CSVs, or synthesize them when no paths are set, then resample.

        Returns:
            Tuple[Profile, Profile]: ``(load, pv)``.

        Raises:
            ConfigError: If a referenced profile file does not exist or only one path is set.
        """
        load_csv, pv_csv = self.profiles.get("load_csv"), self.profiles.get("pv_csv")
        if load_csv is None and pv_csv is None:
            synthetic = self.profiles.get("synthetic") or {}
            logger.info(f"Using synthetic profiles: {synthetic}")
            load, pv = synthesize_profiles(**synthetic)
        elif load_csv is None or pv_csv is None:
            raise ConfigError("load_csv and pv_csv must be given together")
        else:
            for path in (load_csv, pv_csv):
                if not os.path.exists(path):
                    raise ConfigError(f"profile file not found: {path}")
            dt = float(self.profiles["dt_hours"])
            load = load_profile_csv(load_csv, ProfileKind.LOAD, dt)
            pv = load_profile_csv(pv_csv, ProfileKind.PV_NORMALIZED, dt)

        factor = int(self.profiles.get("resample_factor") or 1)
        return resample_average(load, factor), resample_average(pv, factor)

    def build_scenario(self, load: Optional[Profile] = None, pv: Optional[Profile] = None) -> Scenario:
        """Assemble the optimizer scenario, loading profiles unless they are given."""
        if load is None or pv is None:
            load, pv = self.load_profiles()
        try:
            return Scenario(load=load, pv=pv, costs=self.costs, losses=self.losses,
                            formulation=self.formulation, solver=self.solver,
                            verification=self.verification)
        except ProfileError as e:
            raise ConfigError(str(e))
