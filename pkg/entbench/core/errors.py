"""
Exception hierarchy for entbench
"""


class EntbenchError(Exception):
    """Base class for all entbench failures"""


class LayoutParseError(EntbenchError):
    """Layout file is not readable JSON or does not match the schema"""


class LayoutValidationError(EntbenchError, ValueError):
    """Layout parsed but breaks a device or calibration invariant"""


class UnknownQubitError(EntbenchError, KeyError):
    """Qubit index outside the device or switched off"""


class EmbeddingError(EntbenchError):
    """Requested GHZ size cannot be reached from the given source(s)"""


class CircuitError(EntbenchError, ValueError):
    """Malformed gate, operand clash or overlapping tomography supports"""


class DelayTooShortError(CircuitError):
    """Delay window cannot hold the pulses of the requested DD scheme"""


class SimulationSizeError(EntbenchError):
    """Circuit touches more qubits than the simulator cap allows"""


class MitigationError(EntbenchError):
    """Calibration subspace is singular or the solve failed outright"""


class InsufficientShotsError(EntbenchError):
    """Too few conditioned shots to reconstruct a projected pair state"""


class FitError(EntbenchError, ValueError):
    """Decay or scaling fit cannot be performed on the given samples"""


class RecordError(EntbenchError):
    """Experiment record is incomplete or fails the recompute check"""
