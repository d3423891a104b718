"""
Host information for PVBat-Sizer runtime reports.

Runtimes are only comparable on the same machine, so every runtime report records:
- Hostname and operating system
- Python version
- CPU model and core counts
- Total memory
"""

import os
import sys
import logging
import platform
from typing import Any, Dict

import psutil

logger = logging.getLogger(__name__)


def get_cpu_info() -> Dict[str, Any]:
    """
    Get information about the CPU.

    Returns:
        Dict[str, Any]: Dictionary containing CPU model and logical/physical core counts.
    """
    return {
        'model': platform.processor() or platform.machine(),
        'logical_cores': psutil.cpu_count(logical=True) or os.cpu_count() or 1,
        'physical_cores': psutil.cpu_count(logical=False),
    }


def get_memory_total_gb() -> float:
    """
    Get the total system memory in GB, 0.0 if it cannot be determined.
    """
    try:
        return round(psutil.virtual_memory().total / (1024.0 ** 3), 1)
    except Exception as e:
        logger.debug(f"Could not read memory information: {str(e)}")
        return 0.0


def get_host_info() -> Dict[str, Any]:
    """
    Get a description of the host a run executes on.

    Returns:
        Dict[str, Any]: Hostname, OS, Python version, CPU and memory.
    """
    return {
        'hostname': platform.node(),
        'os': f"{platform.system()} {platform.release()}",
        'python': sys.version.split()[0],
        'cpu': get_cpu_info(),
        'memory_total_gb': get_memory_total_gb(),
    }
