"""
Gate-level circuit IR and builders for every experiment.

Conventions:

* ``PHASE(q, phi)`` is ``diag(1, exp(-i*phi))``, so phasing every qubit of an
  N-qubit GHZ state by ``phi`` multiplies the all-ones branch by
  ``exp(-i*N*phi)``.
* Durations are integer nanoseconds and DD windows are built as aligned time
  slices: every slice is either a DELAY on all idle qubits of the window, or
  X pulses on some qubits with a DELAY of the same length on the rest.
* Measurement bit strings put clbit 0 in the rightmost character.
"""

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from loguru import logger

from .embed import BatchPlan, GhzEmbedding, GraphStateSchedule, TomographySet
from .errors import CircuitError, DelayTooShortError
from .topology import DEFAULT_X_NS


class GateKind(str, Enum):
    H = "h"
    X = "x"
    CX = "cx"
    CZ = "cz"
    PHASE = "phase"
    DELAY = "delay"
    MEASURE = "measure"
    BARRIER = "barrier"
    DEPHASE = "dephase"


class PauliBasis(str, Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


QST_SETTINGS: tuple[tuple[PauliBasis, PauliBasis], ...] = tuple(
    (a, b) for a in PauliBasis for b in PauliBasis
)

_ARITY = {
    GateKind.H: 1,
    GateKind.X: 1,
    GateKind.PHASE: 1,
    GateKind.MEASURE: 1,
    GateKind.CX: 2,
    GateKind.CZ: 2,
}


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    angle: float = 0.0
    duration_ns: int = 0
    clbit: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{self.kind.value} has repeated operands {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError(f"{self.kind.value} has a negative qubit index")
        arity = _ARITY.get(self.kind)
        if arity is not None and len(self.qubits) != arity:
            raise CircuitError(f"{self.kind.value} takes {arity} qubit(s), got {len(self.qubits)}")
        if self.kind in (GateKind.DELAY, GateKind.DEPHASE) and not self.qubits:
            raise CircuitError(f"{self.kind.value} needs at least one qubit")
        if not math.isfinite(self.angle):
            raise CircuitError("Gate angle must be finite")
        if self.duration_ns < 0 or int(self.duration_ns) != self.duration_ns:
            raise CircuitError(f"Duration must be a non-negative integer, got {self.duration_ns}")
        if self.kind is GateKind.MEASURE and (self.clbit is None or self.clbit < 0):
            raise CircuitError("MEASURE needs a non-negative clbit")

    @classmethod
    def h(cls, q: int) -> "Gate":
        return cls(GateKind.H, (q,))

    @classmethod
    def x(cls, q: int) -> "Gate":
        return cls(GateKind.X, (q,))

    @classmethod
    def cx(cls, control: int, target: int) -> "Gate":
        return cls(GateKind.CX, (control, target))

    @classmethod
    def cz(cls, a: int, b: int) -> "Gate":
        return cls(GateKind.CZ, (a, b))

    @classmethod
    def phase(cls, q: int, angle: float) -> "Gate":
        return cls(GateKind.PHASE, (q,), angle=float(angle))

    @classmethod
    def delay(cls, qubits: Iterable[int], duration_ns: int) -> "Gate":
        return cls(GateKind.DELAY, tuple(qubits), duration_ns=int(duration_ns))

    @classmethod
    def measure(cls, q: int, clbit: int) -> "Gate":
        return cls(GateKind.MEASURE, (q,), clbit=clbit)

    @classmethod
    def barrier(cls, qubits: Iterable[int] = ()) -> "Gate":
        return cls(GateKind.BARRIER, tuple(qubits))

    @classmethod
    def dephase(cls, qubits: Iterable[int]) -> "Gate":
        return cls(GateKind.DEPHASE, tuple(qubits))

    def inverse(self) -> "Gate":
        if self.kind is GateKind.PHASE:
            return Gate.phase(self.qubits[0], -self.angle)
        if self.kind in (GateKind.H, GateKind.X, GateKind.CX, GateKind.CZ, GateKind.BARRIER):
            return self
        raise CircuitError(f"{self.kind.value} has no unitary inverse")

    def to_dict(self) -> dict:
        data: dict = {"kind": self.kind.value, "qubits": list(self.qubits)}
        if self.kind is GateKind.PHASE:
            data["angle"] = self.angle
        if self.kind is GateKind.DELAY:
            data["duration_ns"] = self.duration_ns
        if self.kind is GateKind.MEASURE:
            data["clbit"] = self.clbit
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Gate":
        return cls(
            kind=GateKind(data["kind"]),
            qubits=tuple(data["qubits"]),
            angle=float(data.get("angle", 0.0)),
            duration_ns=int(data.get("duration_ns", 0)),
            clbit=data.get("clbit"),
        )


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple[Gate, ...]
    n_clbits: int = 0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        clbits = []
        for gate in self.ops:
            for q in gate.qubits:
                if q >= self.n_qubits:
                    raise CircuitError(f"{gate.kind.value} on qubit {q} outside {self.n_qubits}")
            if gate.kind is GateKind.MEASURE:
                clbits.append(gate.clbit)
        if len(set(clbits)) != len(clbits):
            raise CircuitError("Two measurements write the same clbit")
        if any(c >= self.n_clbits for c in clbits):
            raise CircuitError(f"Measurement clbit outside 0..{self.n_clbits - 1}")

    @property
    def used_qubits(self) -> tuple[int, ...]:
        used = {q for gate in self.ops if gate.kind is not GateKind.BARRIER for q in gate.qubits}
        return tuple(sorted(used))

    @property
    def measurements(self) -> tuple[tuple[int, int], ...]:
        """(qubit, clbit) pairs in clbit order"""
        pairs = [(g.qubits[0], g.clbit) for g in self.ops if g.kind is GateKind.MEASURE]
        return tuple(sorted(pairs, key=lambda qc: qc[1]))

    def count_ops(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for gate in self.ops:
            counts[gate.kind.value] = counts.get(gate.kind.value, 0) + 1
        return counts

    def two_qubit_depth(self) -> int:
        """ASAP layer count of two-qubit gates; barriers synchronise their qubits"""
        level: dict[int, int] = {}
        for gate in self.ops:
            if gate.kind in (GateKind.CX, GateKind.CZ):
                a, b = gate.qubits
                layer = max(level.get(a, 0), level.get(b, 0)) + 1
                level[a] = level[b] = layer
            elif gate.kind is GateKind.BARRIER:
                span = gate.qubits or tuple(level)
                if span:
                    top = max(level.get(q, 0) for q in span)
                    for q in span:
                        level[q] = top
        return max(level.values(), default=0)

    def duration_ns(self, gate_ns: Optional[Mapping[GateKind, int]] = None) -> int:
        """Critical-path wall time, counting DELAY exactly and other gates by ``gate_ns``"""
        gate_ns = gate_ns or {}
        clock: dict[int, int] = {}
        for gate in self.ops:
            span = gate.qubits or tuple(clock)
            if not span:
                continue
            start = max(clock.get(q, 0) for q in span)
            length = gate.duration_ns if gate.kind is GateKind.DELAY else gate_ns.get(gate.kind, 0)
            for q in span:
                clock[q] = start + length
        return max(clock.values(), default=0)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g.inverse() for g in reversed(self.ops)), 0, self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_qubits": self.n_qubits,
            "n_clbits": self.n_clbits,
            "two_qubit_depth": self.two_qubit_depth(),
            "ops": [g.to_dict() for g in self.ops],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        return cls(
            n_qubits=int(data["n_qubits"]),
            ops=tuple(Gate.from_dict(op) for op in data["ops"]),
            n_clbits=int(data.get("n_clbits", 0)),
            name=data.get("name", ""),
        )

    def to_qasm(self) -> str:
        """OpenQASM 2 text; delays and dephasing marks become comments"""
        lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{self.n_qubits}];"]
        if self.n_clbits:
            lines.append(f"creg c[{self.n_clbits}];")
        for gate in self.ops:
            operands = ",".join(f"q[{q}]" for q in gate.qubits)
            if gate.kind in (GateKind.H, GateKind.X, GateKind.CX, GateKind.CZ):
                lines.append(f"{gate.kind.value} {operands};")
            elif gate.kind is GateKind.PHASE:
                lines.append(f"u1({-gate.angle!r}) {operands};")
            elif gate.kind is GateKind.MEASURE:
                lines.append(f"measure {operands} -> c[{gate.clbit}];")
            elif gate.kind is GateKind.BARRIER:
                lines.append(f"barrier {operands or 'q'};")
            elif gate.kind is GateKind.DELAY:
                lines.append(f"// delay({gate.duration_ns}ns) {operands}")
            else:
                lines.append(f"// dephase {operands}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Dynamical decoupling
# ---------------------------------------------------------------------------


class DdKind(str, Enum):
    NONE = "none"
    HAHN = "hahn"
    DOUBLE_PI = "double-pi"
    PDD = "pdd"


@dataclass(frozen=True)
class DdScheme:
    kind: DdKind = DdKind.NONE
    pulse_rate: Optional[float] = None
    staggered: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", DdKind(self.kind))
        if self.kind is DdKind.PDD:
            if self.pulse_rate is None or not self.pulse_rate > 0 or not math.isfinite(self.pulse_rate):
                raise CircuitError("PDD needs a positive pulse rate (pulses per microsecond)")
        elif self.pulse_rate is not None:
            raise CircuitError(f"{self.kind.value} takes no pulse rate")
        if self.staggered and self.kind is not DdKind.PDD:
            raise CircuitError("Only PDD can be staggered")

    @classmethod
    def parse(cls, text: str) -> "DdScheme":
        """Parse ``none``, ``hahn``, ``double-pi``, ``pdd:<rate>`` or ``pdd:<rate>:staggered``"""
        parts = text.strip().lower().split(":")
        try:
            kind = DdKind(parts[0])
        except ValueError:
            raise CircuitError(f"Unknown DD scheme {text!r}") from None
        if kind is not DdKind.PDD:
            if len(parts) != 1:
                raise CircuitError(f"Unexpected parameters in DD scheme {text!r}")
            return cls(kind)
        if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] != "staggered"):
            raise CircuitError(f"PDD is written pdd:<rate>[:staggered], got {text!r}")
        try:
            rate = float(parts[1])
        except ValueError:
            raise CircuitError(f"PDD rate {parts[1]!r} is not a number") from None
        return cls(kind, pulse_rate=rate, staggered=len(parts) == 3)

    @property
    def label(self) -> str:
        if self.kind is not DdKind.PDD:
            return self.kind.value
        rate = f"{self.pulse_rate:g}"
        return f"pdd:{rate}:staggered" if self.staggered else f"pdd:{rate}"

    def pulse_count(self, total_ns: int) -> int:
        """Pulses per qubit over ``total_ns``; PDD rounds to the nearest even count"""
        if self.kind is DdKind.NONE:
            return 0
        if self.kind is DdKind.HAHN:
            return 1
        if self.kind is DdKind.DOUBLE_PI:
            return 2
        return 2 * math.floor(self.pulse_rate * total_ns / 1000.0 / 2.0 + 0.5)


NO_DD = DdScheme()


def _round_half_up(value: Fraction) -> int:
    return math.floor(value + Fraction(1, 2))


def insert_dd(
    qubits: Iterable[int],
    total_delay_ns: int,
    dd: DdScheme = NO_DD,
    x_gate_ns: int = DEFAULT_X_NS,
    coloring: Optional[Mapping[int, int]] = None,
) -> list[Gate]:
    """
    Fill an idle window with a DD sequence.

    Args:
        qubits: Qubits idling together during the window
        total_delay_ns: Wall time of the window; the returned slices add up to it
        dd: Scheme to insert
        x_gate_ns: Duration of one X pulse
        coloring: Two-colouring of the qubits, used only by staggered PDD

    Raises:
        DelayTooShortError: the pulses alone do not fit in the window
    """
    window = tuple(sorted(set(qubits)))
    total = int(total_delay_ns)
    if total < 0:
        raise CircuitError("Delay must be non-negative")
    if not window or total == 0:
        return []
    if dd.kind is DdKind.NONE:
        return [Gate.delay(window, total)]

    events: list[tuple[int, ...]]
    positions: list[Fraction]
    if dd.kind is DdKind.HAHN:
        events, positions = [window], [Fraction(1, 2)]
    elif dd.kind is DdKind.DOUBLE_PI:
        events, positions = [window, window], [Fraction(1, 4), Fraction(3, 4)]
    else:
        n = dd.pulse_count(total)
        if n == 0:
            return [Gate.delay(window, total)]
        classes = [window]
        if dd.staggered and coloring:
            first = tuple(q for q in window if coloring.get(q, 0) == 0)
            second = tuple(q for q in window if coloring.get(q, 0) != 0)
            classes = [c for c in (first, second) if c]
        events = [classes[j % len(classes)] for j in range(n * len(classes))]
        slots = len(events)
        positions = [Fraction(2 * j + 1, 2 * slots) for j in range(slots)]

    free = total - len(events) * x_gate_ns
    if free < 0:
        raise DelayTooShortError(
            f"{dd.label} needs {len(events) * x_gate_ns} ns of pulses, window is {total} ns"
        )

    gates: list[Gate] = []
    elapsed = 0
    for group, position in zip(events, positions):
        mark = _round_half_up(free * position)
        if mark > elapsed:
            gates.append(Gate.delay(window, mark - elapsed))
            elapsed = mark
        gates.extend(Gate.x(q) for q in group)
        idle = tuple(q for q in window if q not in group)
        if idle and x_gate_ns > 0:
            gates.append(Gate.delay(idle, x_gate_ns))
    if free > elapsed:
        gates.append(Gate.delay(window, free - elapsed))
    return gates


def window_duration(gates: Sequence[Gate], x_gate_ns: int = DEFAULT_X_NS) -> int:
    """Wall time of a DD window built by ``insert_dd``"""
    return Circuit(
        n_qubits=max((q for g in gates for q in g.qubits), default=0) + 1, ops=tuple(gates)
    ).duration_ns({GateKind.X: x_gate_ns})


# ---------------------------------------------------------------------------
# GHZ and MQC
# ---------------------------------------------------------------------------


def _ghz_ops(emb: GhzEmbedding) -> list[Gate]:
    ops = [Gate.h(emb.source)]
    span = emb.qubits
    for layer in emb.layers:
        ops.extend(Gate.cx(c, t) for c, t in layer)
        ops.append(Gate.barrier(span))
    return ops


def _register_size(qubits: Iterable[int], n_qubits: Optional[int]) -> int:
    top = max(qubits, default=0) + 1
    if n_qubits is None:
        return top
    if n_qubits < top:
        raise CircuitError(f"Register of {n_qubits} qubits cannot hold qubit {top - 1}")
    return n_qubits


def _measure_all(qubits: Sequence[int]) -> list[Gate]:
    return [Gate.measure(q, k) for k, q in enumerate(qubits)]


def build_ghz(emb: GhzEmbedding, n_qubits: Optional[int] = None, measure: bool = False) -> Circuit:
    """H on the source, then the CNOT layers of the embedding"""
    ops = _ghz_ops(emb)
    size = _register_size(emb.included, n_qubits)
    n_clbits = 0
    if measure:
        ops.extend(_measure_all(emb.qubits))
        n_clbits = emb.n
    return Circuit(size, tuple(ops), n_clbits, name=f"ghz{emb.n}")


def build_population(
    emb: GhzEmbedding,
    delay_ns: int = 0,
    dd: DdScheme = NO_DD,
    x_gate_ns: int = DEFAULT_X_NS,
    n_qubits: Optional[int] = None,
) -> Circuit:
    """Prepare, optionally idle, measure: the population circuit of MQC"""
    ops = _ghz_ops(emb)
    ops.extend(insert_dd(emb.qubits, delay_ns, dd, x_gate_ns))
    ops.extend(_measure_all(emb.qubits))
    return Circuit(
        _register_size(emb.included, n_qubits), tuple(ops), emb.n, name=f"ghz{emb.n}-pop"
    )


def mqc_phase_grid(n: int) -> list[float]:
    """phi_j = pi*j/(N+1) for j = 0..2N+1"""
    if n < 1:
        raise ValueError("MQC grid needs N >= 1")
    return [math.pi * j / (n + 1) for j in range(2 * n + 2)]


def build_mqc(
    emb: GhzEmbedding,
    phi: float,
    pi_pulse: bool = False,
    delay_ns: int = 0,
    dd: DdScheme = NO_DD,
    x_gate_ns: int = DEFAULT_X_NS,
    n_qubits: Optional[int] = None,
) -> Circuit:
    """
    One MQC overlap circuit.

    U_GHZ, optional idle window filled with ``dd``, optional X on every GHZ
    qubit, PHASE(phi) on every GHZ qubit, U_GHZ^dagger, measure.
    """
    if not math.isfinite(phi):
        raise CircuitError("MQC phase must be finite")
    prep = _ghz_ops(emb)
    ops = list(prep)
    ops.extend(insert_dd(emb.qubits, delay_ns, dd, x_gate_ns))
    if pi_pulse:
        ops.extend(Gate.x(q) for q in emb.qubits)
    ops.extend(Gate.phase(q, phi) for q in emb.qubits)
    ops.extend(g.inverse() for g in reversed(prep))
    ops.extend(_measure_all(emb.qubits))
    return Circuit(_register_size(emb.included, n_qubits), tuple(ops), emb.n, name=f"ghz{emb.n}-mqc")


# ---------------------------------------------------------------------------
# Graph states and tomography
# ---------------------------------------------------------------------------


def _graph_ops(schedule: GraphStateSchedule) -> list[Gate]:
    ops = [Gate.h(q) for q in schedule.qubits]
    for layer in schedule.layers:
        if not layer:
            continue
        ops.extend(Gate.cz(a, b) for a, b in layer)
        ops.append(Gate.barrier(schedule.qubits))
    return ops


def build_graph_state(schedule: GraphStateSchedule, n_qubits: Optional[int] = None) -> Circuit:
    """H on every qubit, then the CZ layers of the schedule"""
    return Circuit(
        _register_size(schedule.qubits, n_qubits), tuple(_graph_ops(schedule)), name="graph"
    )


def two_coloring(schedule: GraphStateSchedule) -> dict[int, int]:
    """BFS two-colouring of the scheduled graph; odd cycles keep the first colour found"""
    adjacency: dict[int, list[int]] = {q: [] for q in schedule.qubits}
    for a, b in schedule.edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    color: dict[int, int] = {}
    for root in schedule.qubits:
        if root in color:
            continue
        color[root] = 0
        queue = [root]
        while queue:
            q = queue.pop(0)
            for nb in sorted(adjacency[q]):
                if nb not in color:
                    color[nb] = 1 - color[q]
                    queue.append(nb)
    return color


def _basis_change(q: int, basis: PauliBasis) -> list[Gate]:
    if basis is PauliBasis.X:
        return [Gate.h(q)]
    if basis is PauliBasis.Y:
        # S^dagger = diag(1, -i) = PHASE(pi/2)
        return [Gate.phase(q, math.pi / 2), Gate.h(q)]
    return []


def build_qst_batch(
    schedule: GraphStateSchedule,
    batch: Sequence[TomographySet],
    setting: tuple[PauliBasis, PauliBasis],
    delay_ns: int = 0,
    dd: DdScheme = NO_DD,
    x_gate_ns: int = DEFAULT_X_NS,
    dephase: Sequence[tuple[int, ...]] = (),
    n_qubits: Optional[int] = None,
    coloring: Optional[Mapping[int, int]] = None,
) -> Circuit:
    """
    Graph-state preparation followed by one tomography setting on a batch.

    Every pair is rotated into ``setting``; pair and ring qubits are then
    measured, set after set, in ``TomographySet.measured`` order. ``dephase``
    lists correlated Z-twirls applied right after preparation (light-cone
    boundary marks). ``coloring`` overrides the two-colouring used by
    staggered PDD.

    Raises:
        CircuitError: two sets of the batch share a qubit
    """
    basis_a, basis_b = PauliBasis(setting[0]), PauliBasis(setting[1])
    seen: set[int] = set()
    for ts in batch:
        if not seen.isdisjoint(ts.support):
            raise CircuitError(f"Tomography set {ts.label} overlaps another set of the batch")
        seen.update(ts.support)
        missing = ts.support - set(schedule.qubits)
        if missing:
            raise CircuitError(f"Tomography set {ts.label} uses unprepared qubits {sorted(missing)}")

    ops = _graph_ops(schedule)
    ops.extend(Gate.dephase(marks) for marks in dephase)
    if dd.staggered and coloring is None:
        coloring = two_coloring(schedule)
    ops.extend(insert_dd(schedule.qubits, delay_ns, dd, x_gate_ns, coloring))

    clbit = 0
    for ts in batch:
        a, b = ts.pair
        ops.extend(_basis_change(a, basis_a))
        ops.extend(_basis_change(b, basis_b))
        for q in ts.measured:
            ops.append(Gate.measure(q, clbit))
            clbit += 1

    size = _register_size(schedule.qubits, n_qubits)
    name = f"qst-{basis_a.value}{basis_b.value}"
    return Circuit(size, tuple(ops), clbit, name=name)


def build_plan_circuits(
    schedule: GraphStateSchedule,
    plan: BatchPlan,
    delay_ns: int = 0,
    dd: DdScheme = NO_DD,
    x_gate_ns: int = DEFAULT_X_NS,
) -> list[Circuit]:
    """All 9 x batches tomography circuits of a plan, batch-major"""
    circuits = [
        build_qst_batch(schedule, batch, setting, delay_ns, dd, x_gate_ns)
        for batch in plan.batches
        for setting in QST_SETTINGS
    ]
    logger.debug(f"Built {len(circuits)} tomography circuits")
    return circuits
