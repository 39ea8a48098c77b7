"""
Noise model derived from a device calibration.

Placement:
    * depolarizing after H and X (1q, lambda = 2*sx_error) and after CX and CZ
      (2q, lambda = 4/3*cx_error, clamped to 1); PHASE is virtual and noiseless
    * amplitude and phase damping during DELAY only
    * residual ZZ, exp(-i*zeta*t*ZZ/4), on edges whose both ends sit in the
      same DELAY
    * quasi-static detuning, RZ(delta*t) during DELAY, delta drawn per qubit
      from N(0, sigma) and averaged over a fixed ensemble
    * readout confusion on the exact outcome distribution
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Mapping, Optional, Sequence

import numpy as np

from .topology import Calibration, DeviceGraph, Edge, edge_key

QUASI_STATIC_SEED = 1721
KRAUS_ATOL = 1e-10

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def amplitude_damping(gamma: float) -> list[np.ndarray]:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"Damping probability {gamma} outside [0, 1]")
    return [
        np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def phase_damping(lam: float) -> list[np.ndarray]:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"Dephasing probability {lam} outside [0, 1]")
    return [
        np.array([[1, 0], [0, np.sqrt(1 - lam)]], dtype=complex),
        np.array([[0, 0], [0, np.sqrt(lam)]], dtype=complex),
    ]


@lru_cache(maxsize=4)
def _pauli_basis(n_qubits: int) -> tuple[np.ndarray, ...]:
    ops = []
    for labels in product(range(4), repeat=n_qubits):
        op = np.eye(1, dtype=complex)
        for label in labels:
            op = np.kron(op, _PAULIS[label])
        ops.append(op)
    return tuple(ops)


def depolarizing(lam: float, n_qubits: int = 1) -> list[np.ndarray]:
    """Kraus set of rho -> (1 - lam)*rho + lam*I/d"""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"Depolarizing strength {lam} outside [0, 1]")
    paulis = _pauli_basis(n_qubits)
    weight = lam / len(paulis)
    kraus = [np.sqrt(1 - lam + weight) * paulis[0]]
    kraus.extend(np.sqrt(weight) * p for p in paulis[1:])
    return kraus


def compose(first: Sequence[np.ndarray], second: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Kraus set of ``second`` applied after ``first``"""
    return [b @ a for a in first for b in second]


def is_trace_preserving(kraus: Sequence[np.ndarray], atol: float = KRAUS_ATOL) -> bool:
    dim = kraus[0].shape[1]
    total = sum(k.conj().T @ k for k in kraus)
    return bool(np.allclose(total, np.eye(dim), atol=atol))


def zz_unitary(angle: float) -> np.ndarray:
    """exp(-i*angle*ZZ/4) as a 4x4 diagonal"""
    phase = np.exp(-1j * angle / 4)
    return np.diag([phase, phase.conjugate(), phase.conjugate(), phase])


def rz_unitary(angle: float) -> np.ndarray:
    return np.diag([1.0, np.exp(-1j * angle)]).astype(complex)


@dataclass(frozen=True)
class NoiseModel:
    """
    Channel parameters for one device.

    The toggles switch whole noise families off, so a test can keep, say, only
    residual ZZ or only readout confusion.
    """

    calibration: Calibration
    zz_rates: Mapping[Edge, float] = field(default_factory=dict)
    gates: bool = True
    relaxation: bool = True
    zz: bool = True
    readout: bool = True
    detuning: bool = True

    @classmethod
    def from_calibration(
        cls,
        g: DeviceGraph,
        cal: Calibration,
        *,
        gates: bool = True,
        relaxation: bool = True,
        zz: bool = True,
        readout: bool = True,
        detuning: bool = True,
    ) -> "NoiseModel":
        rates = {}
        for e in g.sorted_edges:
            rate = cal.edge(*e).zz_rate_mhz
            if rate != 0.0:
                rates[e] = rate
        return cls(
            calibration=cal,
            zz_rates=rates,
            gates=gates,
            relaxation=relaxation,
            zz=zz,
            readout=readout,
            detuning=detuning,
        )

    @classmethod
    def readout_only(cls, g: DeviceGraph, cal: Calibration) -> "NoiseModel":
        return cls.from_calibration(
            g, cal, gates=False, relaxation=False, zz=False, detuning=False
        )

    # -- gates --------------------------------------------------------------

    def depolarizing_1q(self, q: int) -> float:
        if not self.gates:
            return 0.0
        return min(1.0, 2.0 * self.calibration.qubit(q).sx_error)

    def depolarizing_2q(self, a: int, b: int) -> float:
        if not self.gates:
            return 0.0
        edge = edge_key(a, b)
        if edge not in self.calibration.edges:
            return 0.0
        return min(1.0, 4.0 / 3.0 * self.calibration.edges[edge].cx_error)

    # -- idle windows --------------------------------------------------------

    def damping(self, q: int, duration_ns: int) -> tuple[float, float]:
        """(gamma, lambda) of amplitude and phase damping over ``duration_ns``"""
        if not self.relaxation or duration_ns <= 0:
            return 0.0, 0.0
        qc = self.calibration.qubit(q)
        t_us = duration_ns * 1e-3
        gamma = 1.0 - np.exp(-t_us / qc.t1_us)
        phi_rate = max(0.0, 1.0 / qc.t2_us - 1.0 / (2.0 * qc.t1_us))
        lam = 1.0 - np.exp(-2.0 * t_us * phi_rate)
        return float(gamma), float(lam)

    def idle_kraus(self, q: int, duration_ns: int) -> Optional[list[np.ndarray]]:
        gamma, lam = self.damping(q, duration_ns)
        if gamma == 0.0 and lam == 0.0:
            return None
        return compose(amplitude_damping(gamma), phase_damping(lam))

    def zz_edges_within(self, qubits: Sequence[int]) -> list[tuple[Edge, float]]:
        if not self.zz:
            return []
        idle = set(qubits)
        return [(e, r) for e, r in sorted(self.zz_rates.items()) if e[0] in idle and e[1] in idle]

    def detuning_sigma(self, q: int) -> float:
        if not self.detuning:
            return 0.0
        return self.calibration.qubit(q).detuning_sigma_mhz

    def detuning_ensemble(self, qubits: Sequence[int], realizations: int) -> np.ndarray:
        """
        Frequency offsets in rad/us, shape (realizations, len(qubits)).

        Draws come in +/- pairs from a fixed seed so the ensemble mean is zero.
        """
        sigmas = np.array([self.detuning_sigma(q) for q in qubits], dtype=float)
        if realizations <= 1 or not np.any(sigmas > 0):
            return np.zeros((1, len(qubits)))
        rng = np.random.default_rng(QUASI_STATIC_SEED)
        half = rng.normal(size=((realizations + 1) // 2, len(qubits))) * sigmas
        return np.concatenate([half, -half])[:realizations]

    # -- readout ------------------------------------------------------------

    def confusion(self, q: int) -> Optional[np.ndarray]:
        """Row-stochastic p(measured | prepared), or None when ideal"""
        if not self.readout:
            return None
        matrix = np.asarray(self.calibration.qubit(q).readout, dtype=float)
        if np.allclose(matrix, np.eye(2), atol=0.0):
            return None
        return matrix
