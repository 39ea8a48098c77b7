# entbench/schemas.py
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .deterministic import DEFAULT_SEED


class QremMode(str, Enum):
    """Which readout-mitigation branch headlines a report."""
    ON = "on"
    OFF = "off"
    BOTH = "both"


class WeightMetric(str, Enum):
    """Edge weight used when growing GHZ embeddings."""
    CX_ERROR = "cx_error"
    UNIT = "unit"
    T1_AWARE = "t1-aware"


class ExperimentKind(str, Enum):
    """Experiment families the protocol layer can run."""
    GHZ_FIDELITY = "ghz-fidelity"
    GHZ_DECAY = "ghz-decay"
    GRAPH_CHARACTERISE = "graph-characterise"
    GRAPH_DECAY = "graph-decay"


class CoherenceEstimator(str, Enum):
    """How GHZ coherence is read off the MQC amplitude I_N."""
    OVERLAP = "overlap"
    PROJECTOR = "projector"


class Reducer(str, Enum):
    """How ring projections of one edge are combined."""
    MAX = "max"
    MEAN = "mean"


# ---------------------------------------------------------------------------
# Layout file
# ---------------------------------------------------------------------------


class QubitCalibrationModel(BaseModel):
    """Per-qubit calibration entry; omitted fields take device defaults."""
    model_config = ConfigDict(extra="forbid")

    readout: Optional[tuple[tuple[float, float], tuple[float, float]]] = Field(
        None, description="Row-stochastic confusion matrix p(measured|prepared)."
    )
    t1_us: Optional[float] = Field(None, description="Relaxation time in microseconds.")
    t2_us: Optional[float] = Field(None, description="Dephasing time in microseconds.")
    sx_error: Optional[float] = Field(None, description="Single-qubit gate error.")
    x_ns: Optional[int] = Field(None, description="X gate duration in nanoseconds.")
    measure_ns: Optional[int] = Field(None, description="Measurement duration in nanoseconds.")
    detuning_sigma_mhz: Optional[float] = Field(
        None, description="Quasi-static frequency noise, angular MHz."
    )


class EdgeCalibrationModel(BaseModel):
    """Per-edge calibration entry keyed as "a-b" with a < b."""
    model_config = ConfigDict(extra="forbid")

    cx_error: Optional[float] = Field(None, description="Two-qubit gate error.")
    cnot_ns: Optional[int] = Field(None, description="CNOT duration in nanoseconds.")
    zz_rate_mhz: Optional[float] = Field(
        None, description="Residual ZZ conditional-phase rate, angular MHz."
    )


class CalibrationModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    qubits: dict[str, QubitCalibrationModel] = Field(default_factory=dict)
    edges: dict[str, EdgeCalibrationModel] = Field(default_factory=dict)


class LayoutModel(BaseModel):
    """On-disk device layout: coupling graph plus calibration."""
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = Field(None, description="Free-form device label.")
    n_qubits: int
    edges: list[tuple[int, int]]
    inactive: list[int] = Field(default_factory=list)
    calibration: CalibrationModel = Field(default_factory=CalibrationModel)


# ---------------------------------------------------------------------------
# Experiment plan
# ---------------------------------------------------------------------------


def _strictly_increasing(values: list[int], label: str) -> list[int]:
    if any(v < 0 for v in values):
        raise ValueError(f"{label} must be non-negative")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{label} must be strictly increasing")
    return values


class ExperimentPlan(BaseModel):
    """Everything needed to rerun an experiment from scratch."""
    model_config = ConfigDict(extra="forbid")

    kind: ExperimentKind
    n: Optional[int] = Field(None, ge=1, description="GHZ size for fidelity runs.")
    sizes: list[int] = Field(default_factory=list, description="GHZ sizes for decay runs.")
    replicates: int = Field(1, ge=1)
    delay_ns: int = Field(0, ge=0, description="Fixed delay for characterisation runs.")
    delays_ns: list[int] = Field(default_factory=list, description="Delay grid for decay runs.")
    dd: list[str] = Field(default_factory=lambda: ["none"], min_length=1)
    shots: Optional[int] = Field(None, ge=1, description="None uses the per-kind default.")
    exact: bool = Field(False, description="Use exact outcome distributions instead of sampling.")
    seed: int = Field(DEFAULT_SEED, ge=0)
    qrem: QremMode = QremMode.BOTH
    sources: Optional[list[int]] = Field(None, description="Candidate GHZ sources; None = all.")
    weight: WeightMetric = WeightMetric.CX_ERROR
    coherence: CoherenceEstimator = CoherenceEstimator.OVERLAP
    pi_pulse: bool = Field(False, description="Refocusing X on every GHZ qubit before the MQC phase.")
    light_cone: Optional[bool] = Field(None, description="None uses the config default.")
    drop_layer: Optional[int] = Field(
        None, ge=0, description="Graph-state CZ layer to leave out (fault injection)."
    )

    @field_validator("sizes")
    @classmethod
    def _sizes_increasing(cls, value: list[int]) -> list[int]:
        if any(v < 1 for v in value):
            raise ValueError("GHZ sizes must be at least 1")
        return _strictly_increasing(value, "sizes")

    @field_validator("delays_ns")
    @classmethod
    def _grid_increasing(cls, value: list[int]) -> list[int]:
        return _strictly_increasing(value, "delay grid")

    @field_validator("dd")
    @classmethod
    def _known_schemes(cls, value: list[str]) -> list[str]:
        from .core.circuit import DdScheme

        for text in value:
            DdScheme.parse(text)
        if len(set(value)) != len(value):
            raise ValueError("DD schemes must be distinct")
        return value

    @model_validator(mode="after")
    def _kind_fields(self) -> "ExperimentPlan":
        if self.kind is ExperimentKind.GHZ_FIDELITY and self.n is None:
            raise ValueError("ghz-fidelity plans need n")
        if self.kind is ExperimentKind.GHZ_DECAY:
            if not self.sizes:
                raise ValueError("ghz-decay plans need at least one size")
            if not self.delays_ns:
                raise ValueError("ghz-decay plans need a delay grid")
        if self.kind is ExperimentKind.GRAPH_DECAY and not self.delays_ns:
            raise ValueError("graph-decay plans need a delay grid")
        return self
