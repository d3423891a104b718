"""
Command implementations for PVBat-Sizer.

Each command returns a process exit code:
- 0: success (optimal and tight for ``optimize``)
- 1: failure (bad input, solver failure, missing files)
- 2: completed with reservations (loose relaxation, partial comparison failure)
"""

import os
import sys
import copy
import logging
import traceback
from typing import Any, Dict, Iterable, Optional

import numpy as np

from src.cli import persistence
from src.core import analysis
from src.core.config import ConfigError, ScenarioConfig, get_default_config, load_config, merge_config
from src.core.optimizer import OptimizationError, SlackReport, optimize, verify_relaxation
from src.core.profiles import annual_energy, synthesize_profiles, write_profile_csv
from src.core.system_model import FORMULATION_LABELS, Sizing
from src.utils.logging_utils import setup_logging
from src.utils.system_info import get_host_info

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARTIAL = 2
VERIFY_MATCH_TOL = 1e-9


def _fail(message: str) -> int:
    print(f"Error: {message}", file=sys.stderr)
    logger.debug(traceback.format_exc())
    return EXIT_FAILURE


def apply_overrides(config: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """
    Apply dotted-key overrides such as ``{"costs.c_pv": 800}``; ``None`` values are skipped.

    Raises:
        ConfigError: On unknown keys.
    """
    config = copy.deepcopy(config)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        keys = dotted.split(".")
        node = config
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                raise ConfigError(f"unknown configuration key: {dotted}")
            node = node[key]
        if keys[-1] not in node:
            raise ConfigError(f"unknown configuration key: {dotted}")
        node[keys[-1]] = value
    return config


def _prepare(config_path: str, overrides: Optional[Dict[str, Any]], lossless: bool,
             log_level: Optional[str]) -> Dict[str, Any]:
    config = apply_overrides(load_config(config_path), overrides)
    if lossless:
        config["losses"] = {name: None for name in config["losses"]}
    output_dir = config["output_dir"]
    os.makedirs(output_dir, exist_ok=True)
    setup_logging(log_level, os.path.join(output_dir, persistence.LOG_FILE))
    logger.info(f"Loaded scenario {config_path}, writing to {output_dir}")
    return config


def cmd_optimize(config_path: str, overrides: Optional[Dict[str, Any]] = None, lossless: bool = False,
                 duration_curves: bool = False, log_level: Optional[str] = None) -> int:
    """
    Run the two-stage optimization and write its results.

    Args:
        config_path (str): Scenario file.
        overrides (Dict[str, Any], optional): Dotted-key configuration overrides.
        lossless (bool): Make every component ideal.
        duration_curves (bool): Also write the battery duration curves.
        log_level (str, optional): Log level name.

    Returns:
        int: 0 if optimal and tight, 2 if optimal but the relaxation is loose, 1 on failure.
    """
    try:
        config = _prepare(config_path, overrides, lossless, log_level)
        scenario_config = ScenarioConfig.from_dict(config)
        scenario = scenario_config.build_scenario()
        result = optimize(scenario)
    except (OptimizationError, ValueError, OSError) as e:
        return _fail(str(e))

    output_dir = config["output_dir"]
    paths = persistence.output_paths(output_dir)
    pv_available = scenario.pv_availability * result.sizing.pv_wp
    kpis = analysis.compute_kpis(result.schedule, scenario.load, pv_available, result.sizing,
                                 scenario_config.analysis)

    sizing_doc = result.to_dict()
    sizing_doc["dt_hours"] = scenario.dt_hours
    sizing_doc["n_steps"] = scenario.n_steps
    sizing_doc["scenario"] = {key: config[key] for key in ("losses", "formulation", "verification")}
    persistence.write_json(sizing_doc, paths[persistence.SIZING_FILE])
    persistence.write_schedule_csv(result.schedule, paths[persistence.SCHEDULE_FILE])
    persistence.write_json(kpis.to_dict(), paths[persistence.KPIS_FILE])
    persistence.write_json(result.slack.to_dict(), paths[persistence.SLACK_FILE])
    runtimes = dict(result.runtimes)
    runtimes["total_s"] = float(sum(result.runtimes.values()))
    runtimes["host"] = get_host_info()
    persistence.write_json(runtimes, paths[persistence.RUNTIMES_FILE])
    if duration_curves:
        charge, discharge = analysis.duration_curves(result.schedule, result.sizing.p_b_nom)
        analysis.write_duration_curves_csv(charge, discharge,
                                           os.path.join(output_dir, persistence.DURATION_FILE))

    logger.info(f"Results written to {output_dir}")
    if not result.slack.ok:
        print("Warning: relaxation is not tight or complementarity is violated; "
              f"see {paths[persistence.SLACK_FILE]}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_compare(config_path: str, overrides: Optional[Dict[str, Any]] = None,
                formulations: Optional[Iterable[str]] = None, lossless: bool = False,
                log_level: Optional[str] = None) -> int:
    """
    Compare the four loss formulations.

    Writes comparison.csv, comparison.json and one duration curve file per successful
    formulation.

    Returns:
        int: 0 if every variant succeeded, 2 on partial failure, 1 on bad input or total failure.
    """
    labels = list(formulations) if formulations else list(FORMULATION_LABELS)
    unknown = [label for label in labels if label not in FORMULATION_LABELS]
    if unknown:
        return _fail(f"unknown formulation label(s): {', '.join(unknown)}; "
                     f"expected {', '.join(FORMULATION_LABELS)}")
    try:
        config = _prepare(config_path, overrides, lossless, log_level)
        scenario_config = ScenarioConfig.from_dict(config)
        scenario = scenario_config.build_scenario()
        rows = analysis.compare_formulations(scenario, labels, scenario_config.analysis)
    except (ValueError, OSError) as e:
        return _fail(str(e))

    output_dir = config["output_dir"]
    analysis.write_comparison_csv(rows, os.path.join(output_dir, "comparison.csv"))
    analysis.write_comparison_json(rows, os.path.join(output_dir, "comparison.json"))
    for row in rows:
        if row.duration is not None:
            charge, discharge = row.duration
            analysis.write_duration_curves_csv(
                charge, discharge, os.path.join(output_dir, persistence.variant_duration_file(row.label)))

    failed = [row.label for row in rows if not row.ok]
    if len(failed) == len(rows):
        return _fail("every formulation failed")
    if failed:
        print(f"Warning: formulation(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_synth(output_dir: str, steps: int = 35040, dt_hours: float = 0.25, load_kwh: float = 2774.0,
              pv_wh_per_wp: float = 1020.0, start_day: int = 0, seed: int = 0,
              log_level: Optional[str] = None) -> int:
    """
    Write synthetic load.csv and pv.csv profiles.

    Returns:
        int: 0 on success, 1 on invalid profile parameters.
    """
    setup_logging(log_level)
    try:
        load, pv = synthesize_profiles(steps=steps, dt_hours=dt_hours, load_kwh=load_kwh,
                                       pv_wh_per_wp=pv_wh_per_wp, start_day=start_day, seed=seed)
        os.makedirs(output_dir, exist_ok=True)
        write_profile_csv(load, os.path.join(output_dir, "load.csv"))
        write_profile_csv(pv, os.path.join(output_dir, "pv.csv"))
    except (ValueError, OSError) as e:
        return _fail(str(e))

    logger.info(f"Wrote {steps} samples at {dt_hours} h to {output_dir}: "
                f"load {annual_energy(load) / 1000.0:.1f} kWh, PV {annual_energy(pv):.1f} Wh/Wp")
    return EXIT_OK


def _reports_match(saved: SlackReport, recomputed: SlackReport) -> bool:
    if set(saved.sites) != set(recomputed.sites):
        return False
    pairs = [(saved.sites[n].max_abs_kw, recomputed.sites[n].max_abs_kw) for n in saved.sites]
    pairs += [(saved.sites[n].max_rel, recomputed.sites[n].max_rel) for n in saved.sites]
    pairs += [(saved.complementarity[k], recomputed.complementarity.get(k, np.nan))
              for k in saved.complementarity]
    return all(np.isclose(a, b, rtol=VERIFY_MATCH_TOL, atol=VERIFY_MATCH_TOL) for a, b in pairs)


def cmd_verify(output_dir: str, log_level: Optional[str] = None) -> int:
    """
    Re-run the relaxation check on the files written by ``optimize``.

    Returns:
        int: 0 if tight, complementary and matching slack_report.json; 2 otherwise;
            1 if files are missing or unreadable.
    """
    setup_logging(log_level)
    paths = persistence.output_paths(output_dir)
    needed = (persistence.SIZING_FILE, persistence.SCHEDULE_FILE, persistence.SLACK_FILE)
    missing = [paths[name] for name in needed if not os.path.exists(paths[name])]
    if missing:
        return _fail(f"missing result file(s): {', '.join(missing)}")

    try:
        sizing_doc = persistence.read_json(paths[persistence.SIZING_FILE])
        sizing = Sizing(**sizing_doc["sizing"])
        config = merge_config(get_default_config(), sizing_doc["scenario"])
        scenario_config = ScenarioConfig.from_dict(config)
        schedule = persistence.read_schedule_csv(paths[persistence.SCHEDULE_FILE],
                                                 float(sizing_doc["dt_hours"]))
        saved = SlackReport.from_dict(persistence.read_json(paths[persistence.SLACK_FILE]))
    except (KeyError, TypeError, ValueError, OSError) as e:
        return _fail(f"could not read results in {output_dir}: {str(e)}")

    report = verify_relaxation(schedule, sizing, scenario_config.losses,
                               scenario_config.formulation, scenario_config.verification)
    matches = _reports_match(saved, report)
    logger.info(f"Max relative slack {report.max_rel_slack:.3e}, complementarity "
                f"{report.complementarity}, matches saved report: {matches}")
    if not matches:
        print("Warning: recomputed slack report differs from slack_report.json", file=sys.stderr)
    if not report.ok:
        print("Warning: relaxation is not tight or complementarity is violated", file=sys.stderr)
    return EXIT_OK if report.ok and matches else EXIT_PARTIAL
