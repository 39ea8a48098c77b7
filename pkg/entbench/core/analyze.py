"""
Post-processing: MQC signals, pair tomography, negativity, entanglement graphs,
decay fits and correlation statistics.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import networkx as nx
import numpy as np
from loguru import logger
from scipy import optimize, stats

from ..schemas import CoherenceEstimator, Reducer
from .circuit import QST_SETTINGS, PauliBasis
from .embed import TomographySet, tomography_set
from .errors import FitError, InsufficientShotsError
from .mitigate import QuasiDistribution
from .sim import DensityMatrix, Distribution
from .topology import Calibration, DeviceGraph, Edge, edge_key

MAX_NEGATIVITY = 0.5
CONNECTIVITY_THRESHOLDS = (0.5, 0.75, 0.9)

AnyDistribution = Union[Distribution, QuasiDistribution]


def _freqs(dist: Union[AnyDistribution, Mapping[str, float]]) -> dict[str, float]:
    if isinstance(dist, Mapping):
        return dict(dist)
    return dist.frequencies()


@dataclass(frozen=True)
class Estimate:
    """Mean with its standard error over replicates"""

    value: float
    stderr: float = 0.0
    n: int = 1
    se_defined: bool = False

    @classmethod
    def of(cls, samples: Sequence[float]) -> "Estimate":
        data = np.asarray(list(samples), dtype=float)
        if data.size == 0:
            return cls(0.0, 0.0, 0, False)
        if data.size == 1:
            return cls(float(data[0]), 0.0, 1, False)
        return cls(
            float(data.mean()), float(data.std(ddof=1) / math.sqrt(data.size)), int(data.size), True
        )

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n": self.n, "se_defined": self.se_defined}

    @classmethod
    def from_dict(cls, data: dict) -> "Estimate":
        return cls(float(data["value"]), float(data["stderr"]), int(data["n"]), bool(data["se_defined"]))


# ---------------------------------------------------------------------------
# MQC
# ---------------------------------------------------------------------------


def mqc_population(dist: AnyDistribution) -> float:
    """P = p(0...0) + p(1...1) of the population circuit"""
    freqs = _freqs(dist)
    if not freqs:
        raise ValueError("Empty population distribution")
    n = len(next(iter(freqs)))
    return float(freqs.get("0" * n, 0.0) + freqs.get("1" * n, 0.0))


def mqc_signal(dists: Sequence[AnyDistribution], n: int) -> list[float]:
    """S_phi = p(0...0) of each MQC circuit, in grid order"""
    if len(dists) != 2 * n + 2:
        raise ValueError(f"MQC grid for N={n} has {2 * n + 2} angles, got {len(dists)} results")
    signal = []
    for dist in dists:
        freqs = _freqs(dist)
        width = len(next(iter(freqs), "0" * n))
        if width != n:
            raise ValueError(f"{width}-bit MQC outcome for N={n}")
        signal.append(float(freqs.get("0" * n, 0.0)))
    return signal


def mqc_amplitudes(signal: Sequence[float]) -> list[float]:
    """I_q = |sum_j exp(i q phi_j) S_j| / n_angles for q = 0..N+1"""
    n_angles = len(signal)
    if n_angles < 4 or n_angles % 2:
        raise ValueError(f"MQC grid must have 2N+2 angles, got {n_angles}")
    phases = 2.0 * np.pi * np.arange(n_angles) / n_angles
    values = np.asarray(signal, dtype=float)
    top = n_angles // 2
    return [float(abs(np.sum(np.exp(1j * q * phases) * values)) / n_angles) for q in range(top + 1)]


def coherence(amplitude: float, estimator: CoherenceEstimator = CoherenceEstimator.OVERLAP) -> float:
    """C from I_N: 2*sqrt(I_N) for overlap, 4*I_N for projector"""
    amplitude = max(0.0, float(amplitude))
    if CoherenceEstimator(estimator) is CoherenceEstimator.PROJECTOR:
        return 4.0 * amplitude
    return 2.0 * math.sqrt(amplitude)


def ghz_fidelity(population: float, coherence_value: float) -> float:
    return 0.5 * (population + coherence_value)


@dataclass(frozen=True)
class MqcResult:
    n: int
    population: float
    signal: tuple[float, ...]
    amplitudes: tuple[float, ...]
    coherence: float
    fidelity: float

    @property
    def phases(self) -> tuple[float, ...]:
        return tuple(math.pi * j / (self.n + 1) for j in range(len(self.signal)))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "population": self.population,
            "signal": list(self.signal),
            "amplitudes": list(self.amplitudes),
            "coherence": self.coherence,
            "fidelity": self.fidelity,
        }


def analyze_mqc(
    population_dist: AnyDistribution,
    mqc_dists: Sequence[AnyDistribution],
    n: int,
    estimator: CoherenceEstimator = CoherenceEstimator.OVERLAP,
) -> MqcResult:
    population = mqc_population(population_dist)
    signal = mqc_signal(mqc_dists, n)
    amplitudes = mqc_amplitudes(signal)
    c = coherence(amplitudes[n], estimator)
    return MqcResult(
        n=n,
        population=population,
        signal=tuple(signal),
        amplitudes=tuple(amplitudes),
        coherence=c,
        fidelity=ghz_fidelity(population, c),
    )


# ---------------------------------------------------------------------------
# Pair tomography
# ---------------------------------------------------------------------------

_I2 = np.eye(2, dtype=complex)
_PAULI = {
    "I": _I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def setting_label(setting: tuple[PauliBasis, PauliBasis]) -> str:
    return f"{PauliBasis(setting[0]).value}{PauliBasis(setting[1]).value}"


def ring_outcomes(n_ring: int) -> list[str]:
    return [format(i, f"0{n_ring}b") for i in range(2**n_ring)] if n_ring else [""]


def conditional_distribution(
    dist: AnyDistribution, outcome: str, min_shots: int = 50, shots: Optional[int] = None
) -> dict[str, float]:
    """
    Pair distribution given a ring outcome.

    Keys of ``dist`` are ring bits followed by the two pair bits (pair[0]
    rightmost); the returned keys are the two pair bits.

    Raises:
        InsufficientShotsError: fewer than ``min_shots`` shots land on ``outcome``
    """
    freqs = _freqs(dist)
    if shots is None:
        shots = getattr(dist, "shots", None)
    mass: dict[str, float] = {}
    for key, value in freqs.items():
        if key[:-2] == outcome:
            mass[key[-2:]] = mass.get(key[-2:], 0.0) + value
    total = sum(mass.values())
    if total <= 0.0:
        raise InsufficientShotsError(f"No shots for ring outcome {outcome!r}")
    if shots is not None and total * shots < min_shots - 1e-9:
        raise InsufficientShotsError(
            f"Ring outcome {outcome!r} has {total * shots:.0f} shots, below {min_shots}"
        )
    return {k: v / total for k, v in mass.items()}


def pauli_expectations(conditioned: Mapping[str, Mapping[str, float]]) -> dict[str, float]:
    """
    Two-qubit Pauli expectations from the nine conditioned setting distributions.

    Keys are "PQ" with P acting on pair[0]; single-qubit terms are averaged
    over the three settings that measure them.
    """
    result = {"II": 1.0}
    singles: dict[str, list[float]] = {}
    for label, dist in conditioned.items():
        a_basis, b_basis = label[0], label[1]
        corr = a_val = b_val = 0.0
        for key, p in dist.items():
            bit_a, bit_b = int(key[-1]), int(key[-2])
            sa, sb = (-1) ** bit_a, (-1) ** bit_b
            corr += p * sa * sb
            a_val += p * sa
            b_val += p * sb
        result[f"{a_basis}{b_basis}"] = corr
        singles.setdefault(f"{a_basis}I", []).append(a_val)
        singles.setdefault(f"I{b_basis}", []).append(b_val)
    for key, values in singles.items():
        result[key] = float(np.mean(values))
    return result


def linear_inversion(expectations: Mapping[str, float]) -> np.ndarray:
    """rho = 1/4 sum <PQ> P x Q, pair[0] the most significant qubit"""
    rho = np.zeros((4, 4), dtype=complex)
    for p in "IXYZ":
        for q in "IXYZ":
            label = p + q
            if label not in expectations:
                raise ValueError(f"Missing expectation <{label}>")
            rho += expectations[label] * np.kron(_PAULI[p], _PAULI[q])
    return rho / 4.0


def project_psd(matrix: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues at zero and renormalise the trace"""
    herm = 0.5 * (matrix + matrix.conj().T)
    vals, vecs = np.linalg.eigh(herm)
    vals = np.clip(vals, 0.0, None)
    if vals.sum() <= 0:
        raise ValueError("Estimate has no positive spectrum")
    vals = vals / vals.sum()
    return (vecs * vals) @ vecs.conj().T


def reconstruct_pair_state(
    dists: Mapping[str, AnyDistribution],
    ts: TomographySet,
    projection: str,
    min_shots: int = 50,
    shots: Optional[int] = None,
) -> DensityMatrix:
    """
    Two-qubit state of ``ts.pair`` given the ring outcome ``projection``.

    Args:
        dists: One distribution per setting label ("XX", "XY", ...), over
            ``ts.measured`` in clbit order
        ts: Tomography set the distributions come from
        projection: Ring outcome, ring[0] rightmost
        min_shots: Minimum shots landing on ``projection`` in every setting
        shots: Shot count behind ``dists`` when they carry none

    Raises:
        InsufficientShotsError: some setting has too few conditioned shots
    """
    labels = [setting_label(s) for s in QST_SETTINGS]
    missing = [label for label in labels if label not in dists]
    if missing:
        raise ValueError(f"Missing tomography settings {missing}")
    if len(projection) != len(ts.ring):
        raise ValueError(f"Projection {projection!r} does not match a {len(ts.ring)}-qubit ring")
    conditioned = {
        label: conditional_distribution(dists[label], projection, min_shots, shots) for label in labels
    }
    rho = project_psd(linear_inversion(pauli_expectations(conditioned)))
    return DensityMatrix(rho, ts.pair)


def projection_negativities(
    dists: Mapping[str, AnyDistribution],
    ts: TomographySet,
    min_shots: int = 50,
    shots: Optional[int] = None,
) -> dict[str, float]:
    """Negativity for every ring outcome with enough shots; the rest are skipped with a warning"""
    result = {}
    for outcome in ring_outcomes(len(ts.ring)):
        try:
            rho = reconstruct_pair_state(dists, ts, outcome, min_shots, shots)
        except InsufficientShotsError as e:
            logger.warning(f"⚠️ Skipping projection {outcome or '-'} of {ts.label}: {e}")
            continue
        result[outcome] = negativity(rho)
    return result


# ---------------------------------------------------------------------------
# Negativity
# ---------------------------------------------------------------------------


def partial_transpose(rho: Union[DensityMatrix, np.ndarray], subsystem: Sequence[int]) -> np.ndarray:
    """Transpose the qubits at positions ``subsystem``"""
    data = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    dim = data.shape[0]
    k = int(round(math.log2(dim)))
    if 2**k != dim or data.shape != (dim, dim):
        raise ValueError(f"Matrix of shape {data.shape} is not a multi-qubit density matrix")
    if not subsystem or len(set(subsystem)) == k or any(not 0 <= s < k for s in subsystem):
        raise ValueError(f"Cut {list(subsystem)} is not a proper bipartition of {k} qubits")
    tensor = data.reshape((2,) * (2 * k))
    axes = list(range(2 * k))
    for s in set(subsystem):
        axes[s], axes[k + s] = axes[k + s], axes[s]
    return tensor.transpose(axes).reshape(dim, dim)


def negativity(
    rho: Union[DensityMatrix, np.ndarray], cut: Optional[Sequence[int]] = None, form: str = "eigen"
) -> float:
    """
    Negativity across ``cut`` (positions of subsystem B; default the last qubit).

    ``form="eigen"`` sums (|l| - l)/2 over the partial-transpose spectrum;
    ``form="trace-norm"`` uses (||rho^T_B||_1 - 1)/2.
    """
    data = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    k = int(round(math.log2(data.shape[0])))
    cut = list(cut) if cut is not None else [k - 1]
    pt = partial_transpose(data, cut)
    eigs = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    if form == "eigen":
        return float(np.sum(np.abs(eigs) - eigs) / 2.0)
    if form == "trace-norm":
        return float((np.abs(eigs).sum() - 1.0) / 2.0)
    raise ValueError(f"Unknown negativity form {form!r}")


def teleport_bound(neg: float, m: int = 2) -> float:
    """Lower bound (2/(m+1))(m-1+2N) on the minimum teleportation distance"""
    if m < 2:
        raise ValueError("Local dimension must be at least 2")
    if not -1e-12 <= neg <= (m - 1) / 2 + 1e-12:
        raise ValueError(f"Negativity {neg} outside [0, {(m - 1) / 2}]")
    return 2.0 / (m + 1) * (m - 1 + 2 * neg)


# ---------------------------------------------------------------------------
# Entanglement graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntanglementGraph:
    """Per-edge negativity statistics over a device"""

    device: DeviceGraph
    stats: Mapping[Edge, Estimate]
    reducer: Reducer = Reducer.MAX
    label: str = ""

    def values(self) -> dict[Edge, float]:
        return {e: s.value for e, s in sorted(self.stats.items())}

    def mean_negativity(self) -> tuple[float, float]:
        """Mean and standard deviation of the per-edge values"""
        vals = np.array(list(self.values().values()), dtype=float)
        if vals.size == 0:
            return 0.0, 0.0
        return float(vals.mean()), float(vals.std(ddof=1)) if vals.size > 1 else 0.0

    def to_networkx(self, keep: Optional[float] = None, strict: bool = False) -> nx.Graph:
        """Active qubits plus edges passing ``keep`` (all edges when None)"""
        graph = nx.Graph()
        graph.add_nodes_from(self.device.active_qubits)
        for e, s in sorted(self.stats.items()):
            if keep is None or (s.value > keep if strict else s.value >= keep):
                graph.add_edge(*e, negativity=s.value, stderr=s.stderr)
        return graph

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "reducer": Reducer(self.reducer).value,
            "edges": {f"{a}-{b}": s.to_dict() for (a, b), s in sorted(self.stats.items())},
        }

    @classmethod
    def from_dict(cls, data: dict, device: DeviceGraph) -> "EntanglementGraph":
        stats = {}
        for key, value in data["edges"].items():
            a, b = (int(x) for x in key.split("-"))
            stats[edge_key(a, b)] = Estimate.from_dict(value)
        return cls(device, stats, Reducer(data["reducer"]), data.get("label", ""))


def _reduce(values: Sequence[float], reducer: Reducer) -> float:
    return float(max(values)) if Reducer(reducer) is Reducer.MAX else float(np.mean(values))


def build_entanglement_graph(
    g: DeviceGraph,
    projections: Mapping[Edge, Sequence[Mapping[str, float]]],
    reducer: Reducer = Reducer.MAX,
    label: str = "",
) -> EntanglementGraph:
    """
    Per edge: reduce each replicate's projection negativities, then average
    replicates. Replicates whose projections were all skipped are dropped; an
    edge with no usable replicate reports 0.
    """
    stats = {}
    for edge, replicates in sorted(projections.items()):
        if edge_key(*edge) not in g.edges:
            raise ValueError(f"Edge {edge} is not a device edge")
        per_rep = [_reduce(list(p.values()), reducer) for p in replicates if p]
        stats[edge_key(*edge)] = Estimate.of(per_rep)
    return EntanglementGraph(g, stats, Reducer(reducer), label)


def whole_device(egraph: EntanglementGraph, threshold_fraction: float) -> int:
    """
    Largest connected group of active qubits over edges with N >= x * 0.5.

    ``threshold_fraction`` 0 keeps only edges with strictly positive N.
    """
    if not 0.0 <= threshold_fraction <= 1.0:
        raise ValueError("Threshold fraction must be in [0, 1]")
    if threshold_fraction == 0.0:
        graph = egraph.to_networkx(0.0, strict=True)
    else:
        graph = egraph.to_networkx(threshold_fraction * MAX_NEGATIVITY)
    if graph.number_of_nodes() == 0:
        return 0
    return max(len(c) for c in nx.connected_components(graph))


def is_whole_device(egraph: EntanglementGraph) -> tuple[bool, int]:
    """(every active qubit connected by N > 0 edges, number left out)"""
    n_active = len(egraph.device.active_qubits)
    largest = whole_device(egraph, 0.0)
    return largest == n_active, n_active - largest


def summary_row(egraph: EntanglementGraph, device_name: str = "") -> dict:
    mean, sd = egraph.mean_negativity()
    whole, left_out = is_whole_device(egraph)
    row = {
        "device": device_name or egraph.device.name,
        "qubits": len(egraph.device.active_qubits),
        "edges": len(egraph.stats),
        "mean_negativity": mean,
        "sd_negativity": sd,
        "whole_device": whole,
        "disconnected": left_out,
    }
    for x in CONNECTIVITY_THRESHOLDS:
        row[f"connected_{int(round(x * 100))}"] = whole_device(egraph, x)
    return row


def device_mean_curve(
    times_us: Sequence[float], graphs: Sequence[EntanglementGraph]
) -> list[dict]:
    """Mean and sd of device negativity at every delay"""
    if len(times_us) != len(graphs):
        raise ValueError("One entanglement graph per delay")
    curve = []
    for t, eg in zip(times_us, graphs):
        mean, sd = eg.mean_negativity()
        curve.append({"t_us": float(t), "mean": mean, "sd": sd})
    return curve


# ---------------------------------------------------------------------------
# Fits and statistics
# ---------------------------------------------------------------------------


def _exponential(t, c0, alpha):
    return c0 * np.exp(-alpha * t)


@dataclass(frozen=True)
class DecayFit:
    c0: float
    alpha: float
    covariance: tuple[tuple[float, float], tuple[float, float]]
    r_squared: float
    times_us: tuple[float, ...] = field(default=())
    values: tuple[float, ...] = field(default=())

    @property
    def t_ghz_us(self) -> float:
        return 1.0 / self.alpha if self.alpha > 0 else math.inf

    @property
    def alpha_stderr(self) -> float:
        return float(math.sqrt(max(0.0, self.covariance[1][1])))

    def predict(self, t_us: Union[float, np.ndarray]) -> np.ndarray:
        return _exponential(np.asarray(t_us, dtype=float), self.c0, self.alpha)

    def to_dict(self) -> dict:
        return {
            "c0": self.c0,
            "alpha_per_us": self.alpha,
            "alpha_stderr": self.alpha_stderr,
            "t_ghz_us": self.t_ghz_us if math.isfinite(self.t_ghz_us) else None,
            "covariance": [list(row) for row in self.covariance],
            "r_squared": self.r_squared,
            "times_us": list(self.times_us),
            "values": list(self.values),
        }


def _r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)


def fit_decay(times_us: Sequence[float], values: Sequence[float]) -> DecayFit:
    """
    Least-squares fit of C0*exp(-alpha*t).

    Starts from a log-linear regression over the positive samples.

    Raises:
        FitError: fewer than 3 samples, fewer than 2 distinct delays, negative
            delays, or no positive coherence
    """
    t = np.asarray(times_us, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size != y.size:
        raise FitError("Times and values differ in length")
    if t.size < 3:
        raise FitError(f"Decay fit needs at least 3 samples, got {t.size}")
    if np.any(t < 0):
        raise FitError("Delays must be non-negative")
    if np.unique(t).size < 2:
        raise FitError("Decay fit needs at least two distinct delays")
    positive = y > 0
    if not np.any(positive):
        raise FitError("All coherences are non-positive")

    if np.unique(t[positive]).size >= 2:
        reg = stats.linregress(t[positive], np.log(y[positive]))
        p0 = [float(np.exp(reg.intercept)), float(-reg.slope)]
    else:
        p0 = [float(y[positive].max()), 1.0 / float(t.max())]

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", optimize.OptimizeWarning)
        try:
            popt, pcov = optimize.curve_fit(_exponential, t, y, p0=p0, maxfev=10000)
        except RuntimeError as e:
            raise FitError(f"Exponential fit did not converge: {e}") from e
    pcov = np.where(np.isfinite(pcov), pcov, 0.0)
    c0, alpha = float(popt[0]), float(popt[1])
    fit = DecayFit(
        c0=c0,
        alpha=alpha,
        covariance=((float(pcov[0, 0]), float(pcov[0, 1])), (float(pcov[1, 0]), float(pcov[1, 1]))),
        r_squared=_r_squared(y, _exponential(t, c0, alpha)),
        times_us=tuple(t.tolist()),
        values=tuple(y.tolist()),
    )
    logger.debug(f"Decay fit: C0={c0:.4f}, alpha={alpha:.5f}/us, R2={fit.r_squared:.4f}")
    return fit


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "slope_stderr": self.slope_stderr,
        }


def fit_scaling(sizes: Sequence[int], alphas: Sequence[float]) -> ScalingFit:
    """Ordinary least squares of alpha against N"""
    x = np.asarray(sizes, dtype=float)
    y = np.asarray(alphas, dtype=float)
    if x.size != y.size or x.size < 2:
        raise FitError("Scaling fit needs at least two (N, alpha) pairs")
    if np.ptp(x) == 0:
        raise FitError("Scaling fit needs at least two distinct sizes")
    reg = stats.linregress(x, y)
    r2 = float(reg.rvalue**2) if x.size > 2 or np.ptp(y) > 0 else 1.0
    return ScalingFit(float(reg.slope), float(reg.intercept), r2, float(reg.stderr))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("Pearson correlation needs two equal-length samples of size >= 2")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("Pearson correlation is undefined for zero variance")
    return float(stats.pearsonr(x, y)[0])


def tomography_set_cx_error(g: DeviceGraph, cal: Calibration, ts: TomographySet) -> float:
    """Mean CNOT error over device edges inside the tomography set"""
    support = ts.support
    errors = [cal.edge(*e).cx_error for e in g.sorted_edges if e[0] in support and e[1] in support]
    return float(np.mean(errors))


def negativity_error_correlation(egraph: EntanglementGraph, cal: Calibration) -> float:
    """Pearson R of per-edge negativity against mean CNOT error of its tomography set"""
    edges = sorted(egraph.stats)
    negs = [egraph.stats[e].value for e in edges]
    errs = [tomography_set_cx_error(egraph.device, cal, tomography_set(egraph.device, *e)) for e in edges]
    return pearson(errs, negs)
