"""
Result persistence for PVBat-Sizer.

JSON documents are written with sorted keys and fixed indentation so identical runs give
identical files; CSV floats are written in shortest round-trip form.
"""

import os
import json
import logging
from typing import Any, Dict

import pandas as pd

from src.core.system_model import OperationSchedule

logger = logging.getLogger(__name__)

SIZING_FILE = "sizing.json"
SCHEDULE_FILE = "schedule.csv"
KPIS_FILE = "kpis.json"
SLACK_FILE = "slack_report.json"
RUNTIMES_FILE = "runtimes.json"
DURATION_FILE = "duration_curves.csv"
LOG_FILE = "pvbat.log"
OUTPUT_FILES = (SIZING_FILE, SCHEDULE_FILE, KPIS_FILE, SLACK_FILE, RUNTIMES_FILE)


def write_json(data: Dict[str, Any], path: str) -> None:
    """
    Write a JSON document deterministically.

    Args:
        data (Dict[str, Any]): JSON-serializable data.
        path (str): Destination path.
    """
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: str) -> Dict[str, Any]:
    with open(path, 'r') as f:
        return json.load(f)


def write_schedule_csv(schedule: OperationSchedule, path: str) -> None:
    schedule.to_frame().to_csv(path, index=False, lineterminator='\n')


def read_schedule_csv(path: str, dt_hours: float) -> OperationSchedule:
    """Read a schedule written by :func:`write_schedule_csv`."""
    frame = pd.read_csv(path, float_precision='round_trip')
    return OperationSchedule.from_frame(frame, dt_hours)


def variant_duration_file(label: str) -> str:
    """Duration curve file name of one formulation, e.g. ``duration_curves_CC-CB.csv``."""
    return f"duration_curves_{label}.csv"


def output_paths(output_dir: str) -> Dict[str, str]:
    return {name: os.path.join(output_dir, name) for name in OUTPUT_FILES}
