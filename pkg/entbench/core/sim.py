"""
Execution backends.

The built-in backend evolves a density matrix (or a statevector when the
circuit sees no incoherent noise) over the qubits a circuit actually uses.
Physical qubit indices are kept in circuits; the simulator compresses them to
local axes in ascending order, and ``DensityMatrix`` uses Kronecker order with
the first listed qubit most significant.
"""

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Protocol, Sequence, Union

import networkx as nx
import numpy as np
from loguru import logger

from ..deterministic import rng_for
from .circuit import Circuit, Gate, GateKind
from .config import BenchConfig
from .embed import TomographySet
from .errors import CircuitError, SimulationSizeError
from .noise import NoiseModel, depolarizing, rz_unitary, zz_unitary
from .topology import DeviceGraph, Edge

HERMITIAN_ATOL = 1e-10

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


def _check_keys(keys: Iterable[str]) -> int:
    widths = {len(k) for k in keys}
    if len(widths) > 1:
        raise ValueError(f"Bit strings of mixed length: {sorted(widths)}")
    for key in keys:
        if set(key) - {"0", "1"}:
            raise ValueError(f"Invalid bit string {key!r}")
    return widths.pop() if widths else 0


@dataclass(frozen=True)
class CountsDistribution:
    """Sampled outcomes; clbit 0 is the rightmost character of each key"""

    counts: Mapping[str, int]
    shots: int

    def __post_init__(self):
        object.__setattr__(self, "counts", {k: int(v) for k, v in sorted(self.counts.items()) if v})
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("Counts must be non-negative")
        if sum(self.counts.values()) != self.shots:
            raise ValueError(f"Counts sum to {sum(self.counts.values())}, expected {self.shots}")
        _check_keys(self.counts)

    @property
    def n_clbits(self) -> int:
        return len(next(iter(self.counts), ""))

    def frequencies(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()} if self.shots else {}

    def marginal(self, clbits: Sequence[int]) -> "CountsDistribution":
        """Keep ``clbits``; the first listed becomes clbit 0 of the result"""
        merged: dict[str, int] = {}
        for key, value in self.counts.items():
            sub = _select_bits(key, clbits)
            merged[sub] = merged.get(sub, 0) + value
        return CountsDistribution(merged, self.shots)

    def to_dict(self) -> dict:
        return {"shots": self.shots, "counts": dict(self.counts)}


@dataclass(frozen=True)
class ProbDistribution:
    """Exact outcome probabilities (no sampling)"""

    probabilities: Mapping[str, float]
    shots: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(
            self,
            "probabilities",
            {k: float(v) for k, v in sorted(self.probabilities.items()) if v > 0.0},
        )
        _check_keys(self.probabilities)

    @property
    def n_clbits(self) -> int:
        return len(next(iter(self.probabilities), ""))

    def frequencies(self) -> dict[str, float]:
        return dict(self.probabilities)

    def marginal(self, clbits: Sequence[int]) -> "ProbDistribution":
        merged: dict[str, float] = {}
        for key, value in self.probabilities.items():
            sub = _select_bits(key, clbits)
            merged[sub] = merged.get(sub, 0.0) + value
        return ProbDistribution(merged, self.shots)

    def to_dict(self) -> dict:
        return {"probabilities": dict(self.probabilities)}


Distribution = Union[CountsDistribution, ProbDistribution]


def _select_bits(key: str, clbits: Sequence[int]) -> str:
    width = len(key)
    return "".join(key[width - 1 - c] for c in reversed(clbits))


def distribution_from_dict(data: dict) -> Distribution:
    if "counts" in data:
        return CountsDistribution(data["counts"], int(data["shots"]))
    if "probabilities" in data:
        return ProbDistribution(data["probabilities"], data.get("shots"))
    raise ValueError("Distribution needs 'counts' or 'probabilities'")


# ---------------------------------------------------------------------------
# Density matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    data: np.ndarray
    qubits: tuple[int, ...] = field(default=())

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError("Density matrix must be square")
        k = int(round(np.log2(data.shape[0]))) if data.shape[0] else 0
        if 2**k != data.shape[0]:
            raise ValueError(f"Dimension {data.shape[0]} is not a power of two")
        object.__setattr__(self, "data", data)
        qubits = tuple(self.qubits) or tuple(range(k))
        if len(qubits) != k:
            raise ValueError(f"{len(qubits)} labels for a {k}-qubit matrix")
        object.__setattr__(self, "qubits", qubits)

    @classmethod
    def from_statevector(cls, psi: np.ndarray, qubits: Sequence[int] = ()) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        return cls(np.outer(psi, psi.conj()), tuple(qubits))

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def is_hermitian(self, atol: float = HERMITIAN_ATOL) -> bool:
        return bool(np.allclose(self.data, self.data.conj().T, atol=atol))

    def purity(self) -> float:
        return float(np.trace(self.data @ self.data).real)

    def probabilities(self) -> np.ndarray:
        return np.clip(np.diag(self.data).real, 0.0, None)

    def expectation(self, operator: np.ndarray) -> float:
        return float(np.trace(self.data @ operator).real)

    def partial_trace(self, keep: Sequence[int]) -> "DensityMatrix":
        """Reduced state on ``keep`` (labels), in the order given"""
        positions = [self.qubits.index(q) for q in keep]
        k = self.n_qubits
        tensor = self.data.reshape((2,) * (2 * k))
        traced = [i for i in range(k) if i not in positions]
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        rows = [letters[i] for i in range(k)]
        cols = [letters[k + i] for i in range(k)]
        for i in traced:
            cols[i] = rows[i]
        out = [rows[i] for i in positions] + [cols[i] for i in positions]
        reduced = np.einsum(f"{''.join(rows)}{''.join(cols)}->{''.join(out)}", tensor)
        m = len(positions)
        return DensityMatrix(reduced.reshape(2**m, 2**m), tuple(keep))


def fidelity(rho: DensityMatrix, ideal: DensityMatrix) -> float:
    """Tr(rho * ideal) for a rank-1 ``ideal``"""
    if rho.dim != ideal.dim:
        raise ValueError(f"Dimension mismatch: {rho.dim} vs {ideal.dim}")
    if abs(ideal.purity() - 1.0) > 1e-8:
        raise ValueError("Ideal state must be pure")
    return float(np.trace(rho.data @ ideal.data).real)


def ghz_state(n: int, qubits: Sequence[int] = ()) -> DensityMatrix:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    return DensityMatrix.from_statevector(psi, qubits)


def graph_state(edges: Iterable[Edge], qubits: Sequence[int]) -> DensityMatrix:
    """|G> = prod CZ |+>^n over ``edges``, labels in ``qubits`` order"""
    qubits = tuple(qubits)
    n = len(qubits)
    index = {q: i for i, q in enumerate(qubits)}
    basis = np.arange(2**n)
    signs = np.ones(2**n)
    for a, b in edges:
        bit_a = (basis >> (n - 1 - index[a])) & 1
        bit_b = (basis >> (n - 1 - index[b])) & 1
        signs = signs * np.where(bit_a & bit_b, -1.0, 1.0)
    return DensityMatrix.from_statevector(signs / np.sqrt(2**n), qubits)


# ---------------------------------------------------------------------------
# Tensor kernels
# ---------------------------------------------------------------------------


def _apply(tensor: np.ndarray, matrix: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    m = len(axes)
    op = matrix.reshape((2,) * (2 * m))
    moved = np.tensordot(op, tensor, axes=(list(range(m, 2 * m)), list(axes)))
    return np.moveaxis(moved, list(range(m)), list(axes))


class _State:
    """Statevector or density-matrix tensor over k local qubits"""

    def __init__(self, k: int, density: bool):
        self.k = k
        self.density = density
        shape = (2,) * (2 * k if density else k)
        self.tensor = np.zeros(shape, dtype=complex)
        self.tensor[(0,) * len(shape)] = 1.0

    def unitary(self, matrix: np.ndarray, axes: Sequence[int]) -> None:
        self.tensor = _apply(self.tensor, matrix, axes)
        if self.density:
            self.tensor = _apply(self.tensor, matrix.conj(), [a + self.k for a in axes])

    def channel(self, kraus: Sequence[np.ndarray], axes: Sequence[int]) -> None:
        cols = [a + self.k for a in axes]
        out = np.zeros_like(self.tensor)
        for op in kraus:
            out += _apply(_apply(self.tensor, op, axes), op.conj(), cols)
        self.tensor = out

    def dephase(self, axes: Sequence[int]) -> None:
        flipped = self.tensor
        for a in axes:
            flipped = _apply(_apply(flipped, _Z, [a]), _Z, [a + self.k])
        self.tensor = 0.5 * (self.tensor + flipped)

    def probabilities(self) -> np.ndarray:
        if self.density:
            dim = 2**self.k
            diag = np.diag(self.tensor.reshape(dim, dim)).real
            return np.clip(diag, 0.0, None).reshape((2,) * self.k)
        return np.abs(self.tensor) ** 2

    def matrix(self) -> np.ndarray:
        dim = 2**self.k
        if self.density:
            return self.tensor.reshape(dim, dim)
        psi = self.tensor.reshape(dim)
        return np.outer(psi, psi.conj())


# ---------------------------------------------------------------------------
# Backend
# ---------------------------------------------------------------------------


class Backend(Protocol):
    """Anything that turns circuits into outcome distributions"""

    def run(self, circuits: Sequence[Circuit], shots: int, seed: int) -> list[CountsDistribution]:
        ...


def _check_terminal_measurements(circuit: Circuit) -> None:
    measured: set[int] = set()
    for gate in circuit.ops:
        if gate.kind is GateKind.MEASURE:
            measured.add(gate.qubits[0])
        elif gate.kind is not GateKind.BARRIER and measured.intersection(gate.qubits):
            raise CircuitError(f"{gate.kind.value} acts on a measured qubit; only terminal measurement is supported")


class DensityMatrixSimulator:
    """
    Noisy simulator implementing ``Backend``.

    Args:
        noise: Noise model, or None for ideal evolution and readout
        config: Size caps and sampling knobs
    """

    def __init__(self, noise: Optional[NoiseModel] = None, config: Optional[BenchConfig] = None):
        self.noise = noise
        self.config = config or BenchConfig()

    # -- public API ----------------------------------------------------------

    def run(self, circuits: Sequence[Circuit], shots: int, seed: int) -> list[CountsDistribution]:
        """Sample every circuit; circuit i draws from the stream (seed, i)"""
        return [self.sample(c, shots, seed, i) for i, c in enumerate(circuits)]

    def sample(self, circuit: Circuit, shots: int, seed: int, *keys: int) -> CountsDistribution:
        if shots < 1:
            raise ValueError("shots must be positive")
        exact = self.probabilities(circuit)
        keys_sorted = list(exact.probabilities)
        probs = np.array([exact.probabilities[k] for k in keys_sorted])
        probs = probs / probs.sum()
        rng = rng_for(seed, *keys)
        if circuit.n_clbits <= self.config.max_exact_sampling_bits:
            drawn = rng.multinomial(shots, probs)
            counts = {k: int(c) for k, c in zip(keys_sorted, drawn) if c}
        else:
            picks = rng.choice(len(keys_sorted), size=shots, p=probs)
            tallies = np.bincount(picks, minlength=len(keys_sorted))
            counts = {keys_sorted[i]: int(c) for i, c in enumerate(tallies) if c}
        return CountsDistribution(counts, shots)

    def probabilities(self, circuit: Circuit) -> ProbDistribution:
        """Exact measured distribution, readout confusion included"""
        _check_terminal_measurements(circuit)
        measurements = circuit.measurements
        if not measurements:
            raise CircuitError("Circuit has no measurements")
        local, states = self._evolve(circuit)
        probs = np.mean([s.probabilities() for s in states], axis=0)

        # clbit n-1 first so flat indices read as bit strings
        ordered = [local[q] for q, _ in reversed(measurements)]
        by_clbit = {c: q for q, c in measurements}
        rest = [a for a in range(len(local)) if a not in ordered]
        m = len(ordered)
        marginal = np.transpose(probs, ordered + rest).reshape(2**m, -1).sum(axis=1)
        marginal = marginal.reshape((2,) * m)

        if self.noise is not None:
            for axis, c in enumerate(sorted(by_clbit, reverse=True)):
                confusion = self.noise.confusion(by_clbit[c])
                if confusion is not None:
                    marginal = _apply(marginal.astype(complex), confusion.T.astype(complex), [axis]).real

        flat = np.clip(marginal.reshape(-1), 0.0, None)
        flat = flat / flat.sum()
        width = circuit.n_clbits
        measured_clbits = [c for _, c in measurements]
        result: dict[str, float] = {}
        for index in np.flatnonzero(flat > 1e-15):
            bits = format(int(index), f"0{m}b")
            key = ["0"] * width
            for pos, c in enumerate(sorted(measured_clbits, reverse=True)):
                key[width - 1 - c] = bits[pos]
            result["".join(key)] = float(flat[index])
        return ProbDistribution(result)

    def exact_state(self, circuit: Circuit) -> DensityMatrix:
        """Unsampled state over the used qubits, ascending physical order"""
        _check_terminal_measurements(circuit)
        local, states = self._evolve(circuit)
        qubits = tuple(sorted(local, key=local.get))
        data = np.mean([s.matrix() for s in states], axis=0)
        return DensityMatrix(data, qubits)

    # -- evolution -----------------------------------------------------------

    def _needs_density(self, circuit: Circuit) -> bool:
        if any(g.kind is GateKind.DEPHASE for g in circuit.ops):
            return True
        if self.noise is None:
            return False
        for gate in circuit.ops:
            if gate.kind in (GateKind.H, GateKind.X) and self.noise.depolarizing_1q(gate.qubits[0]) > 0:
                return True
            if gate.kind in (GateKind.CX, GateKind.CZ) and self.noise.depolarizing_2q(*gate.qubits) > 0:
                return True
            if gate.kind is GateKind.DELAY and gate.duration_ns > 0:
                if any(self.noise.idle_kraus(q, gate.duration_ns) for q in gate.qubits):
                    return True
        return False

    def _evolve(self, circuit: Circuit) -> tuple[dict[int, int], list[_State]]:
        used = circuit.used_qubits
        local = {q: i for i, q in enumerate(used)}
        density = self._needs_density(circuit)
        cap = self.config.max_dm_qubits if density else self.config.max_sv_qubits
        if len(used) > cap:
            mode = "density-matrix" if density else "statevector"
            raise SimulationSizeError(f"{len(used)} qubits exceed the {mode} cap of {cap}")

        has_delay = any(g.kind is GateKind.DELAY and g.duration_ns > 0 for g in circuit.ops)
        if self.noise is not None and has_delay:
            offsets = self.noise.detuning_ensemble(used, self.config.quasi_static_realizations)
        else:
            offsets = np.zeros((1, len(used)))

        logger.trace(f"Evolving {circuit.name or 'circuit'} on {len(used)} qubits, density={density}")
        states = []
        for row in offsets:
            state = _State(len(used), density)
            for gate in circuit.ops:
                self._apply_gate(state, gate, local, row)
            states.append(state)
        return local, states

    def _apply_gate(self, state: _State, gate: Gate, local: dict[int, int], offsets: np.ndarray) -> None:
        kind = gate.kind
        axes = [local[q] for q in gate.qubits]
        noise = self.noise
        if kind in (GateKind.BARRIER, GateKind.MEASURE):
            return
        if kind is GateKind.DEPHASE:
            state.dephase(axes)
            return
        if kind in (GateKind.H, GateKind.X):
            state.unitary(_H if kind is GateKind.H else _X, axes)
            lam = noise.depolarizing_1q(gate.qubits[0]) if noise else 0.0
            if lam > 0:
                state.channel(depolarizing(lam, 1), axes)
            return
        if kind is GateKind.PHASE:
            state.unitary(rz_unitary(gate.angle), axes)
            return
        if kind in (GateKind.CX, GateKind.CZ):
            state.unitary(_CX if kind is GateKind.CX else _CZ, axes)
            lam = noise.depolarizing_2q(*gate.qubits) if noise else 0.0
            if lam > 0:
                state.channel(depolarizing(lam, 2), axes)
            return
        # DELAY
        if noise is None or gate.duration_ns == 0:
            return
        t_us = gate.duration_ns * 1e-3
        for q in gate.qubits:
            delta = offsets[local[q]]
            if delta != 0.0:
                state.unitary(rz_unitary(delta * t_us), [local[q]])
        for (a, b), rate in noise.zz_edges_within(gate.qubits):
            state.unitary(zz_unitary(rate * t_us), [local[a], local[b]])
        if state.density:
            for q in gate.qubits:
                kraus = noise.idle_kraus(q, gate.duration_ns)
                if kraus:
                    state.channel(kraus, [local[q]])


def run(
    circuit: Circuit,
    noise: Optional[NoiseModel] = None,
    shots: int = 4096,
    seed: int = 0,
    config: Optional[BenchConfig] = None,
) -> CountsDistribution:
    return DensityMatrixSimulator(noise, config).sample(circuit, shots, seed)


def exact_state(
    circuit: Circuit, noise: Optional[NoiseModel] = None, config: Optional[BenchConfig] = None
) -> DensityMatrix:
    return DensityMatrixSimulator(noise, config).exact_state(circuit)


# ---------------------------------------------------------------------------
# Light cone
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LightCone:
    """Qubits and edges to simulate for one tomography set"""

    qubits: tuple[int, ...]
    edges: tuple[Edge, ...]
    dephase: tuple[tuple[int, ...], ...]

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)


def light_cone_reduce(g: DeviceGraph, ts: TomographySet) -> LightCone:
    """
    Radius-2 induced subgraph around a pair.

    CZ partners just outside the cone are replaced by correlated Z-twirls on
    the cone qubits they touch. For the noiseless graph state the reduced state
    of pair and ring is exact.
    """
    graph = g.to_networkx()
    distances: dict[int, int] = {}
    for root in ts.pair:
        for q, d in nx.single_source_shortest_path_length(graph, root, cutoff=3).items():
            distances[q] = min(d, distances.get(q, d))
    inner = sorted(q for q, d in distances.items() if d <= 2)
    inside = set(inner)
    edges = tuple(e for e in g.sorted_edges if e[0] in inside and e[1] in inside)
    partners: dict[int, list[int]] = {}
    for a, b in g.sorted_edges:
        if (a in inside) == (b in inside):
            continue
        outer, cone = (b, a) if a in inside else (a, b)
        partners.setdefault(outer, []).append(cone)
    marks = tuple(tuple(sorted(partners[o])) for o in sorted(partners))
    return LightCone(tuple(inner), edges, marks)
