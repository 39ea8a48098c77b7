"""
entbench - GHZ and graph-state entanglement benchmarks for superconducting devices
"""

__version__ = "0.1.0"

from .core.config import BenchConfig
from .core.protocol import ExperimentRunner, run_experiment
from .core.records import ExperimentRecord
from .core.topology import Calibration, DeviceGraph, heavy_hex, linear, load_layout, save_layout
from .client import BenchApi, report, run_plan, verify_record
from .schemas import ExperimentKind, ExperimentPlan

__all__ = [
    "BenchConfig",
    "ExperimentRunner",
    "run_experiment",
    "ExperimentRecord",
    "Calibration",
    "DeviceGraph",
    "heavy_hex",
    "linear",
    "load_layout",
    "save_layout",
    "BenchApi",
    "report",
    "run_plan",
    "verify_record",
    "ExperimentKind",
    "ExperimentPlan",
]
