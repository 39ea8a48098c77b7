"""
Device coupling graphs, calibration data and layout files.

Qubits are dense integer indices ``0..n_qubits-1``. Switched-off qubits stay
in the index range (never renumbered) and are listed in ``inactive``; no edge
may touch them. Edges are stored as ``(a, b)`` tuples with ``a < b``.
"""

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import networkx as nx
from loguru import logger
from pydantic import ValidationError

from ..schemas import (
    CalibrationModel,
    EdgeCalibrationModel,
    LayoutModel,
    QubitCalibrationModel,
)
from .errors import LayoutParseError, LayoutValidationError, UnknownQubitError

Edge = tuple[int, int]

# Calibration defaults
DEFAULT_CX_ERROR = 0.01
DEFAULT_READOUT_FLIP = 0.02
DEFAULT_T1_US = 200.0
DEFAULT_T2_US = 120.0
DEFAULT_SX_ERROR = 3e-4
DEFAULT_ZZ_RATE_MHZ = 0.0
DEFAULT_DETUNING_SIGMA_MHZ = 0.0
DEFAULT_CNOT_NS = 385
DEFAULT_X_NS = 35
DEFAULT_MEASURE_NS = 700

STOCHASTIC_ATOL = 1e-12


def edge_key(a: int, b: int) -> Edge:
    """Canonical ``(min, max)`` form of an undirected edge"""
    return (a, b) if a < b else (b, a)


def symmetric_confusion(flip: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Row-stochastic confusion matrix with equal flip probability both ways"""
    return ((1.0 - flip, flip), (flip, 1.0 - flip))


@dataclass(frozen=True)
class DeviceGraph:
    """Coupling graph of a device"""

    n_qubits: int
    edges: frozenset[Edge]
    inactive: frozenset[int] = frozenset()
    name: str = ""

    def __post_init__(self):
        if self.n_qubits < 1:
            raise LayoutValidationError("Device needs at least one qubit")
        normalized = set()
        for a, b in self.edges:
            if a == b:
                raise LayoutValidationError(f"Self-loop on qubit {a}")
            for q in (a, b):
                if not 0 <= q < self.n_qubits:
                    raise LayoutValidationError(
                        f"Edge ({a}, {b}) references qubit {q} outside 0..{self.n_qubits - 1}"
                    )
                if q in self.inactive:
                    raise LayoutValidationError(f"Edge ({a}, {b}) touches inactive qubit {q}")
            normalized.add(edge_key(a, b))
        for q in self.inactive:
            if not 0 <= q < self.n_qubits:
                raise LayoutValidationError(f"Inactive qubit {q} outside 0..{self.n_qubits - 1}")
        object.__setattr__(self, "edges", frozenset(normalized))
        object.__setattr__(self, "inactive", frozenset(self.inactive))

    @classmethod
    def from_edges(
        cls,
        n_qubits: int,
        edges: Iterable[Edge],
        inactive: Iterable[int] = (),
        name: str = "",
    ) -> "DeviceGraph":
        """Build a graph from an edge list, rejecting duplicates"""
        seen: set[Edge] = set()
        for a, b in edges:
            key = edge_key(a, b)
            if key in seen:
                raise LayoutValidationError(f"Duplicate edge {key}")
            seen.add(key)
        return cls(n_qubits=n_qubits, edges=frozenset(seen), inactive=frozenset(inactive), name=name)

    @cached_property
    def active_qubits(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n_qubits) if q not in self.inactive)

    @cached_property
    def sorted_edges(self) -> tuple[Edge, ...]:
        return tuple(sorted(self.edges))

    @cached_property
    def adjacency(self) -> Mapping[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {q: [] for q in self.active_qubits}
        for a, b in self.sorted_edges:
            adj[a].append(b)
            adj[b].append(a)
        return {q: tuple(sorted(ns)) for q, ns in adj.items()}

    @property
    def max_degree(self) -> int:
        return max((len(ns) for ns in self.adjacency.values()), default=0)

    def is_active(self, q: int) -> bool:
        return 0 <= q < self.n_qubits and q not in self.inactive

    def has_edge(self, a: int, b: int) -> bool:
        return edge_key(a, b) in self.edges

    def to_networkx(self) -> nx.Graph:
        """Active qubits as nodes, couplings as edges"""
        graph = nx.Graph(name=self.name)
        graph.add_nodes_from(self.active_qubits)
        graph.add_edges_from(self.sorted_edges)
        return graph

    def with_inactive(self, qubits: Iterable[int]) -> "DeviceGraph":
        """Switch qubits off, dropping their couplings but keeping indices"""
        off = self.inactive | frozenset(qubits)
        kept = frozenset(e for e in self.edges if e[0] not in off and e[1] not in off)
        return DeviceGraph(n_qubits=self.n_qubits, edges=kept, inactive=off, name=self.name)

    def without_edges(self, edges: Iterable[Edge]) -> "DeviceGraph":
        removed = {edge_key(a, b) for a, b in edges}
        missing = removed - self.edges
        if missing:
            raise LayoutValidationError(f"Edges not in device: {sorted(missing)}")
        return replace(self, edges=self.edges - removed)


def _check_qubit(g: DeviceGraph, q: int) -> None:
    if not g.is_active(q):
        raise UnknownQubitError(f"Qubit {q} is not an active qubit of the device")


def degree(g: DeviceGraph, q: int) -> int:
    _check_qubit(g, q)
    return len(g.adjacency[q])


def neighbors(g: DeviceGraph, q: int) -> frozenset[int]:
    _check_qubit(g, q)
    return frozenset(g.adjacency[q])


def connected_components(g: DeviceGraph) -> list[frozenset[int]]:
    """Partition of the active qubits, ordered by smallest member"""
    components = [frozenset(c) for c in nx.connected_components(g.to_networkx())]
    return sorted(components, key=min)


def is_bipartite(g: DeviceGraph) -> bool:
    return nx.is_bipartite(g.to_networkx())


# ---------------------------------------------------------------------------
# Lattices and named layouts
# ---------------------------------------------------------------------------


def heavy_hex(rows: int, cols: int, trim_corners: bool = False) -> DeviceGraph:
    """
    Heavy-hexagonal (subdivided honeycomb) lattice.

    The lattice is built IBM style: ``rows + 1`` horizontal chains joined by
    ``cols + 1`` bridge qubits between each pair of neighbouring chains. Bridge
    columns alternate between offsets 0 and 2 (mod 4), so every even chain
    column has degree 3. Qubits are numbered row-major with each bridge row
    between the chains it joins.

    Args:
        rows: Number of hexagon rows (>= 1)
        cols: Number of hexagons per row (>= 1)
        trim_corners: Drop the dangling corner qubit of the first and last
            chain. ``heavy_hex(6, 3, trim_corners=True)`` is the 127-qubit
            Eagle layout.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"heavy_hex needs rows >= 1 and cols >= 1, got ({rows}, {cols})")

    width = 4 * cols + 1 if rows == 1 else 4 * cols + 3

    def bridge_columns(gap: int) -> list[int]:
        offset = 0 if gap % 2 == 0 else 2
        return [offset + 4 * k for k in range(cols + 1)]

    chain_columns: list[list[int]] = [list(range(width)) for _ in range(rows + 1)]
    if trim_corners and rows > 1:
        chain_columns[0].remove(width - 1)
        last_gap_offset = bridge_columns(rows - 1)[0]
        chain_columns[rows].remove(0 if last_gap_offset == 2 else width - 1)

    index: dict[tuple[str, int, int], int] = {}
    counter = 0
    for r in range(rows + 1):
        for c in chain_columns[r]:
            index[("chain", r, c)] = counter
            counter += 1
        if r < rows:
            for c in bridge_columns(r):
                index[("bridge", r, c)] = counter
                counter += 1

    edges: list[Edge] = []
    for r in range(rows + 1):
        columns = chain_columns[r]
        for c in columns:
            if c + 1 in columns:
                edges.append((index[("chain", r, c)], index[("chain", r, c + 1)]))
        if r < rows:
            for c in bridge_columns(r):
                bridge = index[("bridge", r, c)]
                edges.append(edge_key(index[("chain", r, c)], bridge))
                edges.append(edge_key(bridge, index[("chain", r + 1, c)]))

    name = f"heavy-hex-{rows}x{cols}" + ("-trimmed" if trim_corners else "")
    logger.debug(f"Generated {name}: {counter} qubits, {len(edges)} edges")
    return DeviceGraph.from_edges(counter, edges, name=name)


def linear(n: int) -> DeviceGraph:
    """Path graph 0-1-...-(n-1)"""
    if n < 1:
        raise ValueError("linear layout needs at least one qubit")
    return DeviceGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)], name=f"line-{n}")


def t_layout() -> DeviceGraph:
    """5-qubit T-shaped layout"""
    return DeviceGraph.from_edges(5, [(0, 1), (1, 2), (1, 3), (3, 4)], name="falcon-5t")


def h_layout() -> DeviceGraph:
    """7-qubit H-shaped Falcon layout"""
    return DeviceGraph.from_edges(
        7, [(0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6)], name="falcon-7"
    )


def falcon_27() -> DeviceGraph:
    """27-qubit Falcon layout"""
    return DeviceGraph.from_edges(
        27,
        [
            (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7),
            (7, 10), (8, 9), (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14),
            (14, 16), (15, 18), (16, 19), (17, 18), (18, 21), (19, 20), (19, 22), (21, 23),
            (22, 25), (23, 24), (24, 25), (25, 26),
        ],
        name="falcon-27",
    )


def eagle_127() -> DeviceGraph:
    """127-qubit Eagle layout"""
    return replace(heavy_hex(6, 3, trim_corners=True), name="eagle-127")


NAMED_LAYOUTS = {
    "falcon-5t": t_layout,
    "falcon-7": h_layout,
    "falcon-27": falcon_27,
    "eagle-127": eagle_127,
}


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QubitCalibration:
    readout: tuple[tuple[float, float], tuple[float, float]] = symmetric_confusion(
        DEFAULT_READOUT_FLIP
    )
    t1_us: float = DEFAULT_T1_US
    t2_us: float = DEFAULT_T2_US
    sx_error: float = DEFAULT_SX_ERROR
    x_ns: int = DEFAULT_X_NS
    measure_ns: int = DEFAULT_MEASURE_NS
    detuning_sigma_mhz: float = DEFAULT_DETUNING_SIGMA_MHZ

    def flip_probability(self, prepared: int) -> float:
        """p(measured != prepared | prepared)"""
        return self.readout[prepared][1 - prepared]


@dataclass(frozen=True)
class EdgeCalibration:
    cx_error: float = DEFAULT_CX_ERROR
    cnot_ns: int = DEFAULT_CNOT_NS
    zz_rate_mhz: float = DEFAULT_ZZ_RATE_MHZ


@dataclass(frozen=True)
class Calibration:
    """Per-qubit and per-edge calibration"""

    qubits: Mapping[int, QubitCalibration] = field(default_factory=dict)
    edges: Mapping[Edge, EdgeCalibration] = field(default_factory=dict)

    def qubit(self, q: int) -> QubitCalibration:
        try:
            return self.qubits[q]
        except KeyError:
            raise UnknownQubitError(f"No calibration for qubit {q}") from None

    def edge(self, a: int, b: int) -> EdgeCalibration:
        try:
            return self.edges[edge_key(a, b)]
        except KeyError:
            raise UnknownQubitError(f"No calibration for edge {edge_key(a, b)}") from None

    @classmethod
    def default_for(cls, g: DeviceGraph) -> "Calibration":
        return cls.uniform(g)

    @classmethod
    def uniform(
        cls,
        g: DeviceGraph,
        *,
        cx_error: float = DEFAULT_CX_ERROR,
        readout_flip: float = DEFAULT_READOUT_FLIP,
        t1_us: float = DEFAULT_T1_US,
        t2_us: float = DEFAULT_T2_US,
        sx_error: float = DEFAULT_SX_ERROR,
        zz_rate_mhz: float = DEFAULT_ZZ_RATE_MHZ,
        detuning_sigma_mhz: float = DEFAULT_DETUNING_SIGMA_MHZ,
        cnot_ns: int = DEFAULT_CNOT_NS,
        x_ns: int = DEFAULT_X_NS,
        measure_ns: int = DEFAULT_MEASURE_NS,
    ) -> "Calibration":
        """Same calibration on every active qubit and every edge"""
        qubit = QubitCalibration(
            readout=symmetric_confusion(readout_flip),
            t1_us=t1_us,
            t2_us=t2_us,
            sx_error=sx_error,
            x_ns=x_ns,
            measure_ns=measure_ns,
            detuning_sigma_mhz=detuning_sigma_mhz,
        )
        edge = EdgeCalibration(cx_error=cx_error, cnot_ns=cnot_ns, zz_rate_mhz=zz_rate_mhz)
        return cls(
            qubits={q: qubit for q in g.active_qubits},
            edges={e: edge for e in g.sorted_edges},
        )

    def with_qubit(self, q: int, **changes) -> "Calibration":
        qubits = dict(self.qubits)
        qubits[q] = replace(self.qubit(q), **changes)
        return replace(self, qubits=qubits)

    def with_edge(self, a: int, b: int, **changes) -> "Calibration":
        edges = dict(self.edges)
        edges[edge_key(a, b)] = replace(self.edge(a, b), **changes)
        return replace(self, edges=edges)


def validate_calibration(g: DeviceGraph, cal: Calibration) -> None:
    """Raise LayoutValidationError on any calibration invariant breach"""
    for q in g.active_qubits:
        if q not in cal.qubits:
            raise LayoutValidationError(f"Qubit {q} has no calibration entry")
    for e in g.sorted_edges:
        if e not in cal.edges:
            raise LayoutValidationError(f"Edge {e} has no calibration entry")
    for q in cal.qubits:
        if not 0 <= q < g.n_qubits:
            raise LayoutValidationError(f"Calibration for unknown qubit {q}")
    for e in cal.edges:
        if e not in g.edges:
            raise LayoutValidationError(f"Calibration for unknown edge {e}")

    for q, qc in cal.qubits.items():
        for prepared, row in enumerate(qc.readout):
            if any(not 0.0 <= p <= 1.0 for p in row):
                raise LayoutValidationError(f"Qubit {q} readout row {prepared} outside [0, 1]")
            if abs(sum(row) - 1.0) > STOCHASTIC_ATOL:
                raise LayoutValidationError(
                    f"Qubit {q} readout row {prepared} sums to {sum(row)}, expected 1"
                )
        if qc.t1_us <= 0 or qc.t2_us <= 0:
            raise LayoutValidationError(f"Qubit {q} needs positive T1 and T2")
        if qc.t2_us > 2.0 * qc.t1_us:
            raise LayoutValidationError(
                f"Qubit {q} has T2 = {qc.t2_us} us > 2*T1 = {2.0 * qc.t1_us} us"
            )
        if not 0.0 <= qc.sx_error <= 1.0:
            raise LayoutValidationError(f"Qubit {q} sx_error outside [0, 1]")
        if qc.x_ns < 0 or qc.measure_ns < 0:
            raise LayoutValidationError(f"Qubit {q} has a negative gate duration")
        if qc.detuning_sigma_mhz < 0:
            raise LayoutValidationError(f"Qubit {q} has negative detuning spread")

    for e, ec in cal.edges.items():
        if not 0.0 <= ec.cx_error <= 1.0:
            raise LayoutValidationError(f"Edge {e} cx_error outside [0, 1]")
        if ec.cnot_ns < 0:
            raise LayoutValidationError(f"Edge {e} has a negative CNOT duration")


# ---------------------------------------------------------------------------
# Layout files
# ---------------------------------------------------------------------------


def _parse_edge_key(text: str) -> Edge:
    parts = text.split("-")
    if len(parts) != 2:
        raise LayoutParseError(f"Edge key {text!r} is not of the form 'a-b'")
    try:
        a, b = int(parts[0]), int(parts[1])
    except ValueError:
        raise LayoutParseError(f"Edge key {text!r} is not of the form 'a-b'") from None
    if a >= b:
        raise LayoutValidationError(f"Edge key {text!r} must have a < b")
    return a, b


def layout_to_model(g: DeviceGraph, cal: Calibration) -> LayoutModel:
    qubits = {
        str(q): QubitCalibrationModel(
            readout=qc.readout,
            t1_us=qc.t1_us,
            t2_us=qc.t2_us,
            sx_error=qc.sx_error,
            x_ns=qc.x_ns,
            measure_ns=qc.measure_ns,
            detuning_sigma_mhz=qc.detuning_sigma_mhz,
        )
        for q, qc in sorted(cal.qubits.items())
    }
    edges = {
        f"{a}-{b}": EdgeCalibrationModel(
            cx_error=ec.cx_error, cnot_ns=ec.cnot_ns, zz_rate_mhz=ec.zz_rate_mhz
        )
        for (a, b), ec in sorted(cal.edges.items())
    }
    return LayoutModel(
        name=g.name or None,
        n_qubits=g.n_qubits,
        edges=list(g.sorted_edges),
        inactive=sorted(g.inactive),
        calibration=CalibrationModel(qubits=qubits, edges=edges),
    )


def layout_from_model(model: LayoutModel) -> tuple[DeviceGraph, Calibration]:
    g = DeviceGraph.from_edges(model.n_qubits, model.edges, model.inactive, name=model.name or "")
    defaults = Calibration.default_for(g)

    qubits = dict(defaults.qubits)
    for key, entry in model.calibration.qubits.items():
        try:
            q = int(key)
        except ValueError:
            raise LayoutParseError(f"Qubit key {key!r} is not an integer") from None
        base = qubits.get(q, QubitCalibration())
        updates = {k: v for k, v in entry.model_dump().items() if v is not None}
        qubits[q] = replace(base, **updates)

    edges = dict(defaults.edges)
    for key, entry in model.calibration.edges.items():
        e = _parse_edge_key(key)
        base = edges.get(e, EdgeCalibration())
        updates = {k: v for k, v in entry.model_dump().items() if v is not None}
        edges[e] = replace(base, **updates)

    cal = Calibration(qubits=qubits, edges=edges)
    validate_calibration(g, cal)
    return g, cal


def layout_to_dict(g: DeviceGraph, cal: Calibration) -> dict:
    return layout_to_model(g, cal).model_dump(mode="json", exclude_none=True)


def layout_from_dict(data: dict) -> tuple[DeviceGraph, Calibration]:
    try:
        model = LayoutModel.model_validate(data)
    except ValidationError as e:
        raise LayoutParseError(f"Layout does not match the schema: {e}") from e
    return layout_from_model(model)


def save_layout(path: Union[str, Path], g: DeviceGraph, cal: Optional[Calibration] = None) -> Path:
    """Write a layout file; missing calibration is filled with defaults"""
    cal = cal or Calibration.default_for(g)
    validate_calibration(g, cal)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(layout_to_dict(g, cal), indent=2, sort_keys=True) + "\n")
    logger.info(f"Saved layout {g.name or '<unnamed>'} ({g.n_qubits} qubits) to {path}")
    return path


def load_layout(path: Union[str, Path]) -> tuple[DeviceGraph, Calibration]:
    """
    Read a layout file.

    Raises:
        LayoutParseError: unreadable file, malformed JSON or schema mismatch
        LayoutValidationError: well-formed file that breaks a device invariant
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise LayoutParseError(f"Cannot read layout {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise LayoutParseError(f"Layout {path} is not valid JSON: {e}") from e
    g, cal = layout_from_dict(data)
    logger.info(f"Loaded layout {path}: {g.n_qubits} qubits, {len(g.edges)} edges")
    return g, cal
