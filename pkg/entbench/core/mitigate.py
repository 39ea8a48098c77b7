"""
Readout-error mitigation on the observed-bitstring subspace.

The calibration matrix is tensored, A = A_{n-1} x ... x A_0 with
A_k[measured][prepared] (columns sum to 1), so any element is a product of
single-qubit entries. Mitigation restricts A to the observed bit strings,
renormalises its columns, and solves A_sub x = p_noisy with preconditioned
GMRES, computing matrix-vector products on the fly.
"""

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import scipy.sparse.linalg as spla
from loguru import logger

from .circuit import Circuit, Gate
from .errors import MitigationError
from .sim import Backend, CountsDistribution, Distribution, ProbDistribution
from .topology import STOCHASTIC_ATOL, Calibration

# Rows per streamed block of A_sub
BLOCK_ELEMENTS = 1 << 22
# Largest subspace whose inverse is formed explicitly for the overhead
DENSE_OVERHEAD_LIMIT = 2048
# Residual re-solves after the first GMRES pass, and their target
REFINEMENT_STEPS = 2
REFINED_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class CalibrationMatrixSpec:
    """Per-qubit confusion matrices A[measured][prepared], qubit i = clbit i"""

    matrices: tuple[np.ndarray, ...]
    qubits: tuple[int, ...] = ()

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=float) for m in self.matrices)
        for i, m in enumerate(mats):
            if m.shape != (2, 2):
                raise ValueError(f"Confusion matrix {i} is not 2x2")
            if np.any(m < 0) or not np.allclose(m.sum(axis=0), 1.0, atol=STOCHASTIC_ATOL):
                raise ValueError(f"Confusion matrix {i} is not column-stochastic")
            if np.any(np.diag(m) < 0.5):
                logger.warning(f"⚠️ Confusion matrix {i} has a diagonal below 0.5; inversion is ill-conditioned")
        object.__setattr__(self, "matrices", mats)
        qubits = tuple(self.qubits) or tuple(range(len(mats)))
        if len(qubits) != len(mats):
            raise ValueError("One qubit label per confusion matrix")
        object.__setattr__(self, "qubits", qubits)

    @property
    def n_qubits(self) -> int:
        return len(self.matrices)

    @classmethod
    def from_calibration(cls, cal: Calibration, qubits: Sequence[int]) -> "CalibrationMatrixSpec":
        """Transpose the stored p(measured | prepared) rows for ``qubits`` in clbit order"""
        return cls(tuple(np.asarray(cal.qubit(q).readout).T for q in qubits), tuple(qubits))

    @classmethod
    def symmetric(cls, n_qubits: int, flip: float) -> "CalibrationMatrixSpec":
        m = np.array([[1 - flip, flip], [flip, 1 - flip]])
        return cls(tuple(m for _ in range(n_qubits)))

    @classmethod
    def identity(cls, n_qubits: int) -> "CalibrationMatrixSpec":
        return cls(tuple(np.eye(2) for _ in range(n_qubits)))

    def subset(self, clbits: Sequence[int]) -> "CalibrationMatrixSpec":
        return CalibrationMatrixSpec(
            tuple(self.matrices[c] for c in clbits), tuple(self.qubits[c] for c in clbits)
        )

    def dense(self) -> np.ndarray:
        """Full 2^n matrix, rows and columns indexed by the bit string's integer value"""
        out = np.eye(1)
        for m in reversed(self.matrices):
            out = np.kron(out, m)
        return out

    def to_dict(self) -> dict:
        return {"qubits": list(self.qubits), "matrices": [m.tolist() for m in self.matrices]}

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationMatrixSpec":
        return cls(tuple(np.asarray(m) for m in data["matrices"]), tuple(data["qubits"]))


def _bits(keys: Sequence[str]) -> np.ndarray:
    """(len(keys), width) array, column k = clbit k"""
    if not keys:
        return np.zeros((0, 0), dtype=np.intp)
    arr = np.array([[int(ch) for ch in key] for key in keys], dtype=np.intp)
    return arr[:, ::-1]


def matrix_element(spec: CalibrationMatrixSpec, row: str, col: str) -> float:
    """p(row measured | col prepared) = prod_k A_k[row_k][col_k]"""
    if len(row) != len(col) or len(row) != spec.n_qubits:
        raise ValueError(f"Bit strings of length {len(row)}/{len(col)} for {spec.n_qubits} qubits")
    value = 1.0
    for k in range(spec.n_qubits):
        value *= spec.matrices[k][int(row[-1 - k]), int(col[-1 - k])]
    return float(value)


class _SubspaceMatrix:
    """Matrix-free A restricted to ``keys``, columns renormalised"""

    def __init__(self, spec: CalibrationMatrixSpec, keys: Sequence[str], hamming_limit: Optional[int]):
        self.spec = spec
        self.bits = _bits(keys)
        self.size = len(keys)
        self.hamming_limit = hamming_limit
        self.block = max(1, BLOCK_ELEMENTS // max(1, self.size))
        self.col_norms = np.ones(self.size)
        self.col_norms = self._column_sums()
        if np.any(self.col_norms <= 0):
            raise MitigationError("Calibration subspace has an empty column")

    def rows(self, start: int, stop: int) -> np.ndarray:
        """Rows [start, stop) of the normalised subspace matrix"""
        row_bits = self.bits[start:stop]
        out = np.ones((stop - start, self.size))
        for k, m in enumerate(self.spec.matrices):
            out *= m[row_bits[:, k][:, None], self.bits[:, k][None, :]]
        if self.hamming_limit is not None:
            distance = (row_bits[:, None, :] != self.bits[None, :, :]).sum(axis=2)
            out[distance > self.hamming_limit] = 0.0
        return out / self.col_norms

    def _column_sums(self) -> np.ndarray:
        total = np.zeros(self.size)
        for start in range(0, self.size, self.block):
            total += self.rows(start, min(self.size, start + self.block)).sum(axis=0)
        return total

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x).reshape(-1)
        out = np.empty(self.size, dtype=np.result_type(x, float))
        for start in range(0, self.size, self.block):
            stop = min(self.size, start + self.block)
            out[start:stop] = self.rows(start, stop) @ x
        return out

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y).reshape(-1)
        out = np.zeros(self.size, dtype=np.result_type(y, float))
        for start in range(0, self.size, self.block):
            stop = min(self.size, start + self.block)
            out += self.rows(start, stop).T @ y[start:stop]
        return out

    def diagonal(self) -> np.ndarray:
        diag = np.ones(self.size)
        for k, m in enumerate(self.spec.matrices):
            diag *= m[self.bits[:, k], self.bits[:, k]]
        return diag / self.col_norms

    def dense(self) -> np.ndarray:
        return self.rows(0, self.size)


@dataclass(frozen=True)
class QuasiDistribution:
    """Signed, sum-to-one mitigated distribution"""

    values: Mapping[str, float]
    shots: Optional[int] = None
    overhead: float = 1.0
    converged: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", {k: float(v) for k, v in sorted(self.values.items())})

    @property
    def n_clbits(self) -> int:
        return len(next(iter(self.values), ""))

    def total(self) -> float:
        return float(sum(self.values.values()))

    def frequencies(self) -> dict[str, float]:
        return dict(self.values)

    def marginal(self, clbits: Sequence[int]) -> "QuasiDistribution":
        merged: dict[str, float] = {}
        width = self.n_clbits
        for key, value in self.values.items():
            sub = "".join(key[width - 1 - c] for c in reversed(clbits))
            merged[sub] = merged.get(sub, 0.0) + value
        return QuasiDistribution(merged, self.shots, self.overhead, self.converged)

    def nearest_physical(self) -> ProbDistribution:
        return nearest_physical(self)

    def to_dict(self) -> dict:
        return {
            "quasi": dict(self.values),
            "shots": self.shots,
            "overhead": self.overhead,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QuasiDistribution":
        return cls(data["quasi"], data.get("shots"), float(data["overhead"]), bool(data["converged"]))


def mitigate(
    dist: Distribution,
    spec: CalibrationMatrixSpec,
    hamming_limit: Optional[int] = None,
    tol: float = 1e-5,
    max_iter: int = 25,
) -> QuasiDistribution:
    """
    Mitigate readout errors of ``dist``.

    Args:
        dist: Counts or exact probabilities over ``spec.n_qubits`` clbits
        spec: Tensored calibration in clbit order
        hamming_limit: Drop couplings between strings further apart than this
        tol: GMRES relative residual tolerance of each solve
        max_iter: GMRES iteration cap

    Returns:
        QuasiDistribution; ``converged`` is False when the first GMRES pass
        stopped at max_iter and refinement left the residual above ``tol``
    """
    freqs = dist.frequencies()
    if not freqs:
        raise MitigationError("Cannot mitigate an empty distribution")
    keys = sorted(freqs)
    if len(keys[0]) != spec.n_qubits:
        raise MitigationError(f"{len(keys[0])}-bit outcomes for a {spec.n_qubits}-qubit calibration")
    p = np.array([freqs[k] for k in keys])
    p = p / p.sum()

    sub = _SubspaceMatrix(spec, keys, hamming_limit)
    op = spla.LinearOperator((sub.size, sub.size), matvec=sub.matvec, rmatvec=sub.rmatvec, dtype=float)
    diag = sub.diagonal()
    if np.any(diag <= 0):
        raise MitigationError("Calibration subspace has a zero diagonal")
    precond = spla.LinearOperator((sub.size, sub.size), matvec=lambda v: np.asarray(v).reshape(-1) / diag, dtype=float)

    x, info = spla.gmres(op, p, x0=p.copy(), rtol=tol, atol=0.0, maxiter=max_iter, M=precond)
    if info < 0:
        raise MitigationError(f"GMRES failed with code {info}")
    # Iterative refinement: re-solve on the residual at the same tolerance.
    for _ in range(REFINEMENT_STEPS):
        residual = p - op.matvec(x)
        if np.linalg.norm(residual) <= REFINED_RTOL * np.linalg.norm(p):
            break
        dx, step_info = spla.gmres(op, residual, rtol=tol, atol=0.0, maxiter=max_iter, M=precond)
        if step_info < 0:
            raise MitigationError(f"GMRES failed with code {step_info}")
        x = x + dx
    relative_residual = float(np.linalg.norm(p - op.matvec(x)) / np.linalg.norm(p))
    converged = info == 0 or relative_residual <= tol
    if not converged:
        logger.warning(f"⚠️ Mitigation did not converge in {max_iter} iterations; keeping the partial result")
    logger.debug(f"Mitigated {sub.size} strings, relative residual {relative_residual:.2e}")

    if sub.size <= DENSE_OVERHEAD_LIMIT:
        gamma = _inverse_one_norm(sub.dense())
    else:
        gamma = float(np.abs(x).sum())
        logger.debug(f"Subspace of {sub.size} strings; overhead estimated from the quasi 1-norm")
    return QuasiDistribution(
        dict(zip(keys, x.tolist())),
        shots=getattr(dist, "shots", None),
        overhead=max(1.0, gamma**2),
        converged=converged,
    )


def _inverse_one_norm(matrix: np.ndarray) -> float:
    try:
        inverse = np.linalg.inv(matrix)
    except np.linalg.LinAlgError as e:
        raise MitigationError(f"Reduced calibration matrix is singular: {e}") from e
    return float(np.abs(inverse).sum(axis=0).max())


def overhead(spec: CalibrationMatrixSpec, support: Sequence[str]) -> float:
    """M = ||A_sub^-1||_1^2 on ``support``"""
    if not support:
        raise ValueError("Support must be non-empty")
    sub = _SubspaceMatrix(spec, sorted(set(support)), None)
    return _inverse_one_norm(sub.dense()) ** 2


def sigma_bound(overhead_value: float, shots: int) -> float:
    """Upper bound sqrt(M / shots) on the standard deviation of a mitigated expectation"""
    if shots < 1:
        raise ValueError("shots must be positive")
    return float(np.sqrt(overhead_value / shots))


def nearest_physical(quasi: Union[QuasiDistribution, Mapping[str, float]]) -> ProbDistribution:
    """
    Closest probability distribution in L2 norm over the quasi's support.

    Sorted descending, the smallest entries are zeroed one by one while the
    deficit they carry, shared over the rest, still leaves them negative.
    """
    values = quasi.values if isinstance(quasi, QuasiDistribution) else dict(quasi)
    keys = list(values)
    if not keys:
        return ProbDistribution({})
    vec = np.array([values[k] for k in keys], dtype=float)
    vec = vec + (1.0 - vec.sum()) / len(vec)

    order = np.argsort(-vec, kind="stable")
    sorted_vals = vec[order]
    deficit = 0.0
    i = len(sorted_vals)
    while i > 0 and sorted_vals[i - 1] + deficit / i < 0:
        deficit += sorted_vals[i - 1]
        sorted_vals[i - 1] = 0.0
        i -= 1
    if i > 0:
        sorted_vals[:i] += deficit / i
    projected = np.empty_like(vec)
    projected[order] = np.clip(sorted_vals, 0.0, None)
    projected = projected / projected.sum()
    shots = quasi.shots if isinstance(quasi, QuasiDistribution) else None
    return ProbDistribution(dict(zip(keys, projected.tolist())), shots)


def estimate_calibration(
    backend: Backend, qubits: Sequence[int], shots: int, seed: int, n_qubits: Optional[int] = None
) -> CalibrationMatrixSpec:
    """Tensored calibration from an all-zeros and an all-ones preparation run"""
    size = n_qubits or max(qubits) + 1
    measure = [Gate.measure(q, k) for k, q in enumerate(qubits)]
    zeros = Circuit(size, tuple(measure), len(qubits), name="cal-0")
    ones = Circuit(size, tuple([Gate.x(q) for q in qubits] + measure), len(qubits), name="cal-1")
    counts_zero, counts_one = backend.run([zeros, ones], shots, seed)

    matrices = []
    for k in range(len(qubits)):
        p10 = _bit_frequency(counts_zero, k, "1")
        p01 = _bit_frequency(counts_one, k, "0")
        matrices.append(np.array([[1 - p10, p01], [p10, 1 - p01]]))
    logger.info(f"📏 Estimated readout calibration on {len(qubits)} qubits from {shots} shots")
    return CalibrationMatrixSpec(tuple(matrices), tuple(qubits))


def _bit_frequency(counts: CountsDistribution, clbit: int, value: str) -> float:
    hits = sum(v for k, v in counts.counts.items() if k[-1 - clbit] == value)
    return hits / counts.shots
