"""
Depth-minimal scheduling of entangling circuits on a device graph.

Three planners live here:

* ``embed_ghz`` / ``embed_ghz_best`` grow a GHZ state as a CNOT fan-out tree,
  one layer at a time, from a source qubit.
* ``schedule_graph_state`` splits the device edges into CZ layers.
* ``plan_qst_batches`` packs per-edge tomography sets into batches that can
  be measured simultaneously.

All planners are deterministic: ties are broken by weight, then by endpoint
indices, and sources by index.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import networkx as nx
from loguru import logger

from ..schemas import WeightMetric
from .errors import EmbeddingError
from .topology import Calibration, DeviceGraph, Edge, edge_key

QST_SETTINGS_PER_BATCH = 9
LAYER_COLORS = ["red", "green", "blue", "orange", "purple", "brown"]


def edge_weight(cal: Calibration, a: int, b: int, metric: WeightMetric) -> float:
    """Cost of using the coupling (a, b) under the given metric"""
    metric = WeightMetric(metric)
    if metric is WeightMetric.UNIT:
        return 1.0
    ec = cal.edge(a, b)
    if metric is WeightMetric.CX_ERROR:
        return ec.cx_error
    t1 = min(cal.qubit(a).t1_us, cal.qubit(b).t1_us)
    return ec.cx_error + ec.cnot_ns * 1e-3 / t1


# ---------------------------------------------------------------------------
# GHZ embedding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GhzEmbedding:
    """Layered CNOT tree preparing an N-qubit GHZ state"""

    source: int
    layers: tuple[tuple[tuple[int, int], ...], ...]
    included: tuple[int, ...]
    total_cost: float = 0.0

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def n(self) -> int:
        return len(self.included)

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(sorted(self.included))

    def check(self, g: Optional[DeviceGraph] = None) -> None:
        """Raise EmbeddingError if the tree breaks a structural invariant"""
        touched = {self.source}
        for k, layer in enumerate(self.layers):
            targets = [t for _, t in layer]
            controls = [c for c, _ in layer]
            if len(set(targets)) != len(targets) or len(set(controls)) != len(controls):
                raise EmbeddingError(f"Layer {k} reuses a qubit")
            for c, t in layer:
                if c not in touched:
                    raise EmbeddingError(f"Layer {k}: control {c} not yet entangled")
                if t in touched:
                    raise EmbeddingError(f"Layer {k}: target {t} already entangled")
                if g is not None and not g.has_edge(c, t):
                    raise EmbeddingError(f"Layer {k}: ({c}, {t}) is not a device edge")
            touched.update(targets)
        if touched != set(self.included):
            raise EmbeddingError("Included qubits do not match the CNOT tree")

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "depth": self.depth,
            "n": self.n,
            "included": list(self.included),
            "layers": [[list(e) for e in layer] for layer in self.layers],
            "total_cost": self.total_cost,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GhzEmbedding":
        return cls(
            source=int(data["source"]),
            layers=tuple(tuple((int(c), int(t)) for c, t in layer) for layer in data["layers"]),
            included=tuple(int(q) for q in data["included"]),
            total_cost=float(data["total_cost"]),
        )


def _component_of(g: DeviceGraph, source: int) -> set[int]:
    seen = {source}
    frontier = [source]
    while frontier:
        q = frontier.pop()
        for nb in g.adjacency[q]:
            if nb not in seen:
                seen.add(nb)
                frontier.append(nb)
    return seen


def _fanout_layer(
    g: DeviceGraph,
    cal: Calibration,
    included: Sequence[int],
    entangled: set[int],
    metric: WeightMetric,
    budget: int,
) -> list[tuple[int, int]]:
    """Pick the CNOTs of one layer: most new qubits, then growth, then weight"""
    candidates = sorted(
        {(c, t) for c in included for t in g.adjacency[c] if t not in entangled},
        key=lambda ct: (edge_weight(cal, *ct, metric), min(ct), max(ct)),
    )
    if not candidates:
        return []

    def growth(t: int) -> int:
        return sum(1 for nb in g.adjacency[t] if nb not in entangled)

    # Integer scores keep the matching exact: growth dominates weight rank.
    m = len(candidates)
    rank_span = m * (m + 1)
    bipartite = nx.Graph()
    for rank, (c, t) in enumerate(candidates):
        bipartite.add_edge(
            ("c", c), ("t", t), weight=growth(t) * rank_span + (m - rank), cheap=m - rank, rank=rank
        )
    matching = nx.max_weight_matching(bipartite, maxcardinality=True)
    if len(matching) >= budget:
        # Final layer: growth no longer matters, keep the cheapest edges.
        matching = nx.max_weight_matching(bipartite, maxcardinality=True, weight="cheap")

    chosen = []
    for u, v in matching:
        c, t = (u[1], v[1]) if u[0] == "c" else (v[1], u[1])
        chosen.append((c, t))
    chosen.sort(key=lambda ct: bipartite.edges[("c", ct[0]), ("t", ct[1])]["rank"])
    return sorted(chosen[:budget])


def embed_ghz(
    g: DeviceGraph,
    cal: Calibration,
    source: int,
    n: int,
    weight: WeightMetric = WeightMetric.CX_ERROR,
) -> GhzEmbedding:
    """
    Grow an n-qubit GHZ CNOT tree from ``source``.

    Each layer, every entangled qubit may fan out one CNOT to one neighbour
    that is not yet entangled. Layers are filled as a maximum matching between
    entangled controls and fresh targets; among equally large layers, targets
    that can keep growing are preferred, then lower edge weight. The last
    layer, which only needs the remaining qubits, takes the cheapest edges.

    Raises:
        EmbeddingError: source inactive, or n exceeds the source's component
    """
    if not g.is_active(source):
        raise EmbeddingError(f"Source {source} is not an active qubit")
    if n < 1:
        raise EmbeddingError(f"GHZ size must be at least 1, got {n}")
    component = _component_of(g, source)
    if n > len(component):
        raise EmbeddingError(
            f"Cannot reach {n} qubits from source {source}: component has {len(component)}"
        )

    included = [source]
    entangled = {source}
    layers: list[tuple[tuple[int, int], ...]] = []
    total_cost = 0.0
    while len(included) < n:
        layer = _fanout_layer(g, cal, included, entangled, weight, n - len(included))
        if not layer:
            raise EmbeddingError(f"Growth from source {source} stalled at {len(included)} qubits")
        for c, t in layer:
            included.append(t)
            entangled.add(t)
            total_cost += edge_weight(cal, c, t, weight)
        layers.append(tuple(layer))

    return GhzEmbedding(
        source=source, layers=tuple(layers), included=tuple(included), total_cost=total_cost
    )


def embed_ghz_best(
    g: DeviceGraph,
    cal: Calibration,
    n: int,
    candidate_sources: Optional[Iterable[int]] = None,
    weight: WeightMetric = WeightMetric.CX_ERROR,
) -> GhzEmbedding:
    """
    Trial every candidate source and keep the shallowest embedding.

    Ties are broken by total edge cost, then by lowest source index.
    """
    sources = sorted(set(g.active_qubits if candidate_sources is None else candidate_sources))
    if not sources:
        raise EmbeddingError("No candidate sources given")

    best: Optional[GhzEmbedding] = None
    best_key: Optional[tuple[int, float, int]] = None
    for source in sources:
        try:
            emb = embed_ghz(g, cal, source, n, weight)
        except EmbeddingError as e:
            logger.debug(f"Source {source} rejected: {e}")
            continue
        key = (emb.depth, round(emb.total_cost, 12), source)
        if best_key is None or key < best_key:
            best, best_key = emb, key

    if best is None:
        raise EmbeddingError(f"No candidate source can reach {n} qubits")
    logger.info(
        f"GHZ({n}) embedded from source {best.source}: depth {best.depth}, "
        f"cost {best.total_cost:.4g} ({len(sources)} sources trialled)"
    )
    return best


def embedding_to_dot(emb: GhzEmbedding, g: DeviceGraph) -> str:
    """DOT map of the device with the CNOT tree drawn as arrows labelled by layer"""
    used = {edge_key(c, t): (c, t, k + 1) for k, layer in enumerate(emb.layers) for c, t in layer}
    lines = [f'digraph "{g.name or "device"}" {{', "  node [shape=circle];"]
    for q in g.active_qubits:
        style = ' style=filled fillcolor="lightblue"' if q in emb.included else ""
        extra = " penwidth=3" if q == emb.source else ""
        lines.append(f"  {q} [label=\"{q}\"{style}{extra}];")
    for a, b in g.sorted_edges:
        if (a, b) in used:
            c, t, k = used[(a, b)]
            color = LAYER_COLORS[(k - 1) % len(LAYER_COLORS)]
            lines.append(f'  {c} -> {t} [label="{k}" color="{color}"];')
        else:
            lines.append(f'  {a} -> {b} [dir=none color="gray80"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Graph-state scheduling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphStateSchedule:
    """CZ layers preparing the native graph state of a device"""

    layers: tuple[tuple[Edge, ...], ...]
    qubits: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(sorted(e for layer in self.layers for e in layer))

    def layer_of(self) -> dict[Edge, int]:
        return {e: k for k, layer in enumerate(self.layers) for e in layer}

    def restrict(self, qubits: Iterable[int]) -> "GraphStateSchedule":
        """Same layering, keeping only edges inside ``qubits``"""
        keep = set(qubits)
        layers = tuple(
            tuple(e for e in layer if e[0] in keep and e[1] in keep) for layer in self.layers
        )
        return GraphStateSchedule(layers=layers, qubits=tuple(q for q in self.qubits if q in keep))

    def without_layer(self, index: int) -> "GraphStateSchedule":
        """Drop one CZ layer (fault injection)"""
        if not 0 <= index < len(self.layers):
            raise IndexError(f"Schedule has no layer {index}")
        return GraphStateSchedule(
            layers=self.layers[:index] + self.layers[index + 1 :], qubits=self.qubits
        )

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "qubits": list(self.qubits),
            "layers": [[list(e) for e in layer] for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GraphStateSchedule":
        return cls(
            layers=tuple(tuple(edge_key(int(a), int(b)) for a, b in layer) for layer in data["layers"]),
            qubits=tuple(int(q) for q in data["qubits"]),
        )


def schedule_graph_state(g: DeviceGraph) -> GraphStateSchedule:
    """
    Peel the device edges into CZ layers, one matching per layer.

    Each layer is a maximum-weight matching in which covering a vertex of the
    current highest remaining degree outweighs any number of other edges. On
    bipartite devices (every heavy-hex lattice) such a matching always exists,
    so the layer count equals the maximum degree.
    """
    remaining = set(g.edges)
    if not remaining:
        raise ValueError("Graph-state scheduling needs at least one active edge")

    layers: list[tuple[Edge, ...]] = []
    while remaining:
        degree: dict[int, int] = {}
        for a, b in remaining:
            degree[a] = degree.get(a, 0) + 1
            degree[b] = degree.get(b, 0) + 1
        top = max(degree.values())
        cover_bonus = len(remaining) + 1

        graph = nx.Graph()
        for a, b in sorted(remaining):
            hits = (degree[a] == top) + (degree[b] == top)
            graph.add_edge(a, b, weight=1 + cover_bonus * hits)
        matching = nx.max_weight_matching(graph)
        layer = tuple(sorted(edge_key(u, v) for u, v in matching))
        layers.append(layer)
        remaining.difference_update(layer)

    logger.info(f"Graph state on {len(g.edges)} edges scheduled in {len(layers)} CZ layers")
    return GraphStateSchedule(layers=tuple(layers), qubits=g.active_qubits)


def schedule_to_dot(schedule: GraphStateSchedule, g: DeviceGraph) -> str:
    """DOT map with edges coloured by CZ layer (red, green, blue, ...)"""
    layer_of = schedule.layer_of()
    lines = [f'graph "{g.name or "device"}" {{', "  node [shape=circle];"]
    for q in g.active_qubits:
        lines.append(f'  {q} [label="{q}"];')
    for e in g.sorted_edges:
        if e in layer_of:
            k = layer_of[e]
            color = LAYER_COLORS[k % len(LAYER_COLORS)]
            lines.append(f'  {e[0]} -- {e[1]} [color="{color}" label="{k + 1}"];')
        else:
            lines.append(f'  {e[0]} -- {e[1]} [color="gray80" style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Parallel tomography batches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TomographySet:
    """A target pair plus every neighbour of either endpoint"""

    pair: Edge
    ring: tuple[int, ...]

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.pair) | frozenset(self.ring)

    @property
    def measured(self) -> tuple[int, ...]:
        """Measurement order: pair first, then ring ascending (clbit order)"""
        return (*self.pair, *self.ring)

    @property
    def label(self) -> str:
        return f"{self.pair[0]}-{self.pair[1]}"

    def to_dict(self) -> dict:
        return {"pair": list(self.pair), "ring": list(self.ring)}

    @classmethod
    def from_dict(cls, data: dict) -> "TomographySet":
        a, b = data["pair"]
        return cls(pair=edge_key(int(a), int(b)), ring=tuple(int(q) for q in data["ring"]))


def tomography_set(g: DeviceGraph, a: int, b: int) -> TomographySet:
    if not g.has_edge(a, b):
        raise ValueError(f"({a}, {b}) is not a device edge")
    pair = edge_key(a, b)
    ring = (set(g.adjacency[a]) | set(g.adjacency[b])) - set(pair)
    return TomographySet(pair=pair, ring=tuple(sorted(ring)))


@dataclass(frozen=True)
class BatchPlan:
    batches: tuple[tuple[TomographySet, ...], ...]

    @property
    def sets(self) -> tuple[TomographySet, ...]:
        return tuple(s for batch in self.batches for s in batch)

    def to_dict(self) -> dict:
        return {
            "n_batches": len(self.batches),
            "n_circuits": circuits_per_plan(self),
            "batches": [[s.to_dict() for s in batch] for batch in self.batches],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BatchPlan":
        return cls(
            batches=tuple(
                tuple(TomographySet.from_dict(s) for s in batch) for batch in data["batches"]
            )
        )


def plan_qst_batches(g: DeviceGraph) -> BatchPlan:
    """
    First-fit packing of tomography sets with pairwise disjoint supports.

    Edges are visited in ascending (min endpoint, max endpoint) order; each set
    goes into the first batch it does not overlap, else opens a new batch.
    """
    batches: list[list[TomographySet]] = []
    occupied: list[set[int]] = []
    for a, b in g.sorted_edges:
        ts = tomography_set(g, a, b)
        for batch, used in zip(batches, occupied):
            if used.isdisjoint(ts.support):
                batch.append(ts)
                used.update(ts.support)
                break
        else:
            batches.append([ts])
            occupied.append(set(ts.support))
    plan = BatchPlan(batches=tuple(tuple(batch) for batch in batches))
    logger.info(
        f"Planned {len(g.edges)} tomography sets into {len(plan.batches)} batches "
        f"({circuits_per_plan(plan)} circuits)"
    )
    return plan


def circuits_per_plan(plan: BatchPlan) -> int:
    """Two-qubit tomography needs 3^2 basis settings per batch"""
    return QST_SETTINGS_PER_BATCH * len(plan.batches)
