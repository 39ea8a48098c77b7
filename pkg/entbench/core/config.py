"""
Configuration management for benchmark runs
"""

from dataclasses import dataclass
from typing import Optional

from loguru import logger


# Experiment constants
EXPERIMENT_KINDS = ["ghz-fidelity", "ghz-decay", "graph-characterise", "graph-decay"]
DD_SCHEMES = ["none", "hahn", "double-pi", "pdd"]
WEIGHT_METRICS = ["cx_error", "unit", "t1-aware"]
QREM_MODES = ["on", "off", "both"]


@dataclass
class BenchConfig:
    """Library-level knobs shared by the simulator, mitigation and protocols"""

    # Shot counts per experiment kind
    shots_ghz: int = 4096
    shots_characterisation: int = 8192
    shots_graph_decay: int = 4096

    # Readout mitigation
    mitigation_tol: float = 1e-5
    mitigation_max_iter: int = 25
    hamming_limit: Optional[int] = None

    # Tomography
    min_projection_shots: int = 50

    # Simulator caps
    max_dm_qubits: int = 14
    max_sv_qubits: int = 24
    max_exact_sampling_bits: int = 20
    quasi_static_realizations: int = 16

    # Execution
    threads: int = 1
    light_cone: bool = True
    progress: bool = True

    def __post_init__(self):
        """Post-initialization validation"""
        for name in ("shots_ghz", "shots_characterisation", "shots_graph_decay"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.mitigation_tol < 1.0:
            raise ValueError("Mitigation tolerance must be between 0 and 1")
        if self.mitigation_max_iter < 1:
            raise ValueError("Mitigation max_iter must be at least 1")
        if self.hamming_limit is not None and self.hamming_limit < 0:
            raise ValueError("Hamming limit must be non-negative")
        if self.min_projection_shots < 1:
            raise ValueError("min_projection_shots must be at least 1")
        if not 1 <= self.max_dm_qubits <= 16:
            raise ValueError("Density-matrix cap must be between 1 and 16 qubits")
        if not 1 <= self.max_sv_qubits <= 30:
            raise ValueError("Statevector cap must be between 1 and 30 qubits")
        if self.max_exact_sampling_bits < 1:
            raise ValueError("max_exact_sampling_bits must be positive")
        if self.quasi_static_realizations < 1:
            raise ValueError("quasi_static_realizations must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    def shots_for(self, kind: str) -> int:
        """Default shot count for an experiment kind"""
        if kind == "ghz-fidelity" or kind == "ghz-decay":
            return self.shots_ghz
        if kind == "graph-characterise":
            return self.shots_characterisation
        if kind == "graph-decay":
            return self.shots_graph_decay
        raise ValueError(f"Unknown experiment kind: {kind}")

    def log_summary(self) -> None:
        logger.debug(
            f"BenchConfig: threads={self.threads}, light_cone={self.light_cone}, "
            f"tol={self.mitigation_tol}, max_iter={self.mitigation_max_iter}"
        )

    @classmethod
    def from_dict(cls, config_dict: dict) -> "BenchConfig":
        """Create config from dictionary"""
        known = {name for name in cls.__dataclass_fields__}
        unknown = set(config_dict) - known
        if unknown:
            raise ValueError(f"Unknown config keys: {sorted(unknown)}")
        return cls(**config_dict)

    def to_dict(self) -> dict:
        """Convert config to dictionary"""
        return {
            field.name: getattr(self, field.name)
            for field in self.__dataclass_fields__.values()
        }
