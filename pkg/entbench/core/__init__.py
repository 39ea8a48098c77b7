"""
Core benchmarking modules
"""

from .config import BenchConfig
from .topology import Calibration, DeviceGraph
from .embed import GhzEmbedding, GraphStateSchedule, BatchPlan, embed_ghz, embed_ghz_best
from .circuit import Circuit, DdScheme, Gate
from .sim import DensityMatrixSimulator, DensityMatrix
from .mitigate import CalibrationMatrixSpec, mitigate
from .protocol import ExperimentRunner
from .records import ExperimentRecord

__all__ = [
    "BenchConfig",
    "Calibration",
    "DeviceGraph",
    "GhzEmbedding",
    "GraphStateSchedule",
    "BatchPlan",
    "embed_ghz",
    "embed_ghz_best",
    "Circuit",
    "DdScheme",
    "Gate",
    "DensityMatrixSimulator",
    "DensityMatrix",
    "CalibrationMatrixSpec",
    "mitigate",
    "ExperimentRunner",
    "ExperimentRecord",
]
