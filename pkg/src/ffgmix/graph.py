"""Forney-style factor graphs: construction, validation, scheduling and inference.

Edges are variables and connect at most two node ports. Each edge has an
arbitrary direction (tail -> head); the FORWARD message flows from the tail
node to the head node and the BACKWARD message the other way.

Half-edges must be terminated before inference, either by ``observe`` (a
point-mass prior) or by ``declare_free`` (a flat terminal). On a tree one
leaf-to-root and one root-to-leaf sweep computes every message exactly once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator

from .distributions import Message, PointMass, PointMassIndex, product
from .errors import (
    ArityError,
    CyclicGraphError,
    GraphConstructionError,
    PortBoundError,
    ScheduleError,
)
from .nodes import REAL, FreeEnd, NodeKind, Prior, VariableKind

Port = tuple[int, str]


class Direction(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass
class _Edge:
    kind: VariableKind
    tail: Port | None = None
    head: Port | None = None


@dataclass
class _Node:
    kind: NodeKind
    edges: dict[str, int] = field(default_factory=dict)


class FactorGraph:
    """Mutable during construction; frozen by a successful ``validate``."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._edges: list[_Edge] = []
        self.observations: dict[int, object] = {}
        self.free_edges: set[int] = set()
        self.frozen = False
        self.conditional_edges: frozenset[int] = frozenset()
        self.conditional_nodes: frozenset[int] = frozenset()

    def __repr__(self):
        return f"FactorGraph({len(self._nodes)} nodes, {len(self._edges)} edges)"

    # -------------------------------------------------------- construction

    def _mutable(self):
        if self.frozen:
            raise GraphConstructionError("graph is frozen after validation")

    def add_node(self, kind: NodeKind) -> int:
        self._mutable()
        self._nodes.append(_Node(kind))
        return len(self._nodes) - 1

    def _bind(self, edge: int, port: Port):
        node_id, name = port
        if not 0 <= node_id < len(self._nodes):
            raise GraphConstructionError(f"no node {node_id}")
        node = self._nodes[node_id]
        if name not in node.kind.ports:
            raise GraphConstructionError(f"node {node_id} ({type(node.kind).__name__}) has no port {name!r}")
        if name in node.edges:
            raise PortBoundError(f"port {name!r} of node {node_id} is already bound to edge {node.edges[name]}")
        node.edges[name] = edge

    def add_edge(self, tail: Port | None = None, head: Port | None = None, kind: VariableKind = REAL) -> int:
        """Add an edge between two ``(node, port)`` ends; either end may be left open."""
        self._mutable()
        if kind.family != "real" and kind.size is None:
            raise GraphConstructionError("discrete edge kinds need a size")
        edge = len(self._edges)
        if tail is not None and head is not None and tail == head:
            raise PortBoundError(f"edge cannot bind port {tail} twice")
        for end in (tail, head):
            if end is not None:
                node_id, name = end
                if 0 <= node_id < len(self._nodes) and name in self._nodes[node_id].edges:
                    raise PortBoundError(f"port {name!r} of node {node_id} is already bound")
        self._edges.append(_Edge(kind))
        for attr, end in (("tail", tail), ("head", head)):
            if end is not None:
                self._bind(edge, end)
                setattr(self._edges[edge], attr, end)
        return edge

    def attach(self, edge: int, node: int, port: str):
        """Bind the open end of ``edge`` (tail first) to ``(node, port)``."""
        self._mutable()
        e = self._edge(edge)
        if e.tail is not None and e.head is not None:
            raise ArityError(f"edge {edge} already connects two nodes")
        self._bind(edge, (node, port))
        if e.tail is None:
            e.tail = (node, port)
        else:
            e.head = (node, port)

    def observe(self, edge: int, value) -> int:
        """Clamp ``edge`` to ``value`` by installing a point-mass terminal on its open end."""
        kind = self._edge(edge).kind
        if kind.family == "real":
            body = PointMass(value)
        elif kind.family == "categorical":
            body = PointMassIndex(int(value), kind.size)
        else:
            raise GraphConstructionError(f"cannot observe a {kind.family} edge")
        node = self._terminate(edge, Prior(body))
        self.observations[edge] = value
        return node

    def declare_free(self, edge: int) -> int:
        """Terminate the open end of ``edge`` with a flat (uninformative) factor."""
        node = self._terminate(edge, FreeEnd(self._edge(edge).kind))
        self.free_edges.add(edge)
        return node

    def set_terminal(self, node: int, distribution) -> None:
        """Replace the distribution of a prior or observation terminal in place.

        Allowed on a frozen graph, so one validated structure and its schedule
        can be reused across many data values.
        """
        n = self._nodes[node]
        if not isinstance(n.kind, Prior):
            raise GraphConstructionError(f"node {node} is not a prior terminal")
        edge = n.edges["out"]
        kind = Prior(distribution)
        if not kind.port_kind("out").accepts(self._edges[edge].kind):
            raise GraphConstructionError(f"{type(distribution).__name__} does not fit edge {edge}")
        n.kind = kind
        if edge in self.observations:
            self.observations[edge] = getattr(distribution, "value", getattr(distribution, "index", None))

    def _terminate(self, edge: int, kind: NodeKind) -> int:
        e = self._edge(edge)
        if e.tail is not None and e.head is not None:
            raise ArityError(f"edge {edge} has no open end")
        node = self.add_node(kind)
        self.attach(edge, node, "out")
        return node

    # ------------------------------------------------------------- queries

    def _edge(self, edge: int) -> _Edge:
        if not 0 <= edge < len(self._edges):
            raise GraphConstructionError(f"no edge {edge}")
        return self._edges[edge]

    @property
    def n_nodes(self) -> int:
        return len(self._nodes)

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    def node_kind(self, node: int) -> NodeKind:
        return self._nodes[node].kind

    def node_edges(self, node: int) -> dict[str, int]:
        return dict(self._nodes[node].edges)

    def edge_kind(self, edge: int) -> VariableKind:
        return self._edge(edge).kind

    def endpoints(self, edge: int) -> tuple[Port | None, Port | None]:
        e = self._edge(edge)
        return e.tail, e.head

    def direction_from(self, node: int, edge: int) -> Direction:
        """Direction of the message that ``node`` sends along ``edge``."""
        e = self._edges[edge]
        if e.tail is not None and e.tail[0] == node:
            return Direction.FORWARD
        return Direction.BACKWARD

    def direction_into(self, node: int, edge: int) -> Direction:
        """Direction of the message that ``node`` receives along ``edge``."""
        e = self._edges[edge]
        if e.head is not None and e.head[0] == node:
            return Direction.FORWARD
        return Direction.BACKWARD

    def neighbour(self, node: int, edge: int) -> int:
        e = self._edges[edge]
        return e.head[0] if e.tail[0] == node else e.tail[0]

    def node_ids(self) -> Iterator[int]:
        return iter(range(len(self._nodes)))

    # ----------------------------------------------------------- validation

    def validate(self) -> None:
        """Check acyclicity, full port binding and port kinds, then freeze.

        Raises ``CyclicGraphError`` or ``GraphConstructionError``.
        """
        parent = list(range(len(self._nodes)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, e in enumerate(self._edges):
            if e.tail is None or e.head is None:
                continue
            a, b = find(e.tail[0]), find(e.head[0])
            if a == b:
                raise CyclicGraphError(f"edge {i} closes a cycle")
            parent[a] = b

        for i, e in enumerate(self._edges):
            if e.tail is None or e.head is None:
                raise GraphConstructionError(f"edge {i} has an open end; observe it or declare it free")
        for n, node in enumerate(self._nodes):
            missing = [p for p in node.kind.ports if p not in node.edges]
            if missing:
                raise GraphConstructionError(f"node {n} ({type(node.kind).__name__}) has unbound ports {missing}")
            kinds = {p: self._edges[e].kind for p, e in node.edges.items()}
            for p, k in kinds.items():
                expected = node.kind.port_kind(p)
                if expected is not None and not expected.accepts(k):
                    raise GraphConstructionError(f"node {n} port {p!r} expects {expected}, edge has {k}")
            node.kind.check(kinds)

        if not self._nodes:
            raise GraphConstructionError("graph is empty")
        roots = {find(i) for i in range(len(self._nodes))}
        if len(roots) > 1:
            raise GraphConstructionError(f"graph has {len(roots)} disconnected components")
        self._mark_conditional()
        self.frozen = True

    def _mark_conditional(self):
        # Everything reached through a mixture node's branch port lives inside
        # one submodel; products there give that submodel's evidence.
        edges, nodes = set(), set()
        for n, node in enumerate(self._nodes):
            for port in getattr(node.kind, "branch_ports", ()):
                stack = [(n, node.edges[port])]
                while stack:
                    src, e = stack.pop()
                    if e in edges:
                        continue
                    edges.add(e)
                    nxt = self.neighbour(src, e)
                    nodes.add(nxt)
                    stack.extend((nxt, f) for f in self._nodes[nxt].edges.values() if f != e)
        self.conditional_edges = frozenset(edges)
        self.conditional_nodes = frozenset(nodes)


def validate(graph: FactorGraph) -> None:
    graph.validate()


# ------------------------------------------------------------------ schedule


@dataclass(frozen=True)
class ScheduleEntry:
    node: int
    edge: int
    direction: Direction


@dataclass(frozen=True)
class Schedule:
    entries: tuple[ScheduleEntry, ...]
    root: int

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def schedule_sweep(graph: FactorGraph, root: int | None = None) -> Schedule:
    """Leaf-to-root then root-to-leaf message order over the tree.

    By default the root is the node with the most ports (lowest id on ties),
    so hubs such as equality nodes send only after hearing from every
    neighbour. Any root gives the same messages.
    """
    if not graph.frozen:
        graph.validate()
    if root is None:
        root = max(graph.node_ids(), key=lambda n: (len(graph.node_kind(n).ports), -n))
    elif not 0 <= root < graph.n_nodes:
        raise ScheduleError(f"no node {root}")
    parent_edge: dict[int, int | None] = {root: None}
    order = []
    stack = [root]
    while stack:
        n = stack.pop()
        order.append(n)
        for e in reversed(list(graph.node_edges(n).values())):
            if e == parent_edge[n]:
                continue
            child = graph.neighbour(n, e)
            parent_edge[child] = e
            stack.append(child)

    entries = []
    for n in reversed(order):
        e = parent_edge[n]
        if e is not None:
            entries.append(ScheduleEntry(n, e, graph.direction_from(n, e)))
    for n in order:
        for e in graph.node_edges(n).values():
            if e != parent_edge[n]:
                entries.append(ScheduleEntry(n, e, graph.direction_from(n, e)))
    return Schedule(tuple(entries), root)


# ----------------------------------------------------------------- inference


@dataclass
class InferenceResult:
    graph: FactorGraph
    messages: dict[tuple[int, Direction], Message]
    marginals: dict[int, object]
    edge_log_evidence: dict[int, float | None]
    log_evidence: float | None
    _node_log_evidence: dict[int, float | None] = field(default_factory=dict, repr=False)

    def incoming(self, node: int, edge: int) -> Message:
        return self.messages[(edge, self.graph.direction_into(node, edge))]

    def inbox(self, node: int) -> dict[str, Message]:
        return {p: self.incoming(node, e) for p, e in self.graph.node_edges(node).items()}

    def node_log_evidence(self, node: int) -> float | None:
        if node not in self._node_log_evidence:
            value = self.graph.node_kind(node).log_evidence(self.inbox(node))
            self._node_log_evidence[node] = None if math.isnan(value) else value
        return self._node_log_evidence[node]


def run(graph: FactorGraph, schedule: Schedule | None = None, *, marginals: bool = True) -> InferenceResult:
    """Compute every message in ``schedule`` with its node's sum-product rule.

    Edge marginals are the normalized products of opposing messages, and the
    log of each product's mass is that edge's log evidence. The canonical
    ``log_evidence`` is taken at the lowest-numbered edge whose product is
    proper, skipping edges inside mixture branches (whose products carry the
    branch's own evidence). ``marginals=False`` skips that step and leaves
    both empty.
    """
    if schedule is None:
        schedule = schedule_sweep(graph)
    elif not graph.frozen:
        graph.validate()
    messages: dict[tuple[int, Direction], Message] = {}
    for entry in schedule:
        edges = graph._nodes[entry.node].edges
        inbox = {}
        out_port = None
        for port, e in edges.items():
            if e == entry.edge:
                out_port = port
                continue
            key = (e, graph.direction_into(entry.node, e))
            if key not in messages:
                raise ScheduleError(f"message {entry} needs {key} which has not been computed")
            inbox[port] = messages[key]
        if out_port is None:
            raise ScheduleError(f"node {entry.node} is not attached to edge {entry.edge}")
        messages[(entry.edge, entry.direction)] = graph.node_kind(entry.node).outgoing(out_port, inbox)
    if len(messages) != 2 * graph.n_edges:
        raise ScheduleError(f"schedule computed {len(messages)} of {2 * graph.n_edges} messages")

    result = InferenceResult(graph, messages, {}, {}, None)
    if marginals:
        for e in range(graph.n_edges):
            fwd = messages[(e, Direction.FORWARD)]
            bwd = messages[(e, Direction.BACKWARD)]
            body, log_z = product(fwd.body, bwd.body)
            result.marginals[e] = body
            if math.isnan(log_z):
                result.edge_log_evidence[e] = None
            else:
                result.edge_log_evidence[e] = fwd.log_scale + bwd.log_scale + log_z
        result.log_evidence = next(
            (
                v
                for e, v in result.edge_log_evidence.items()
                if v is not None and e not in graph.conditional_edges
            ),
            None,
        )
    return result


def log_evidence_at_edge(result: InferenceResult, edge: int) -> float | None:
    """log of the integral of fwd * bwd on ``edge``; None when both messages are improper."""
    return result.edge_log_evidence[edge]


def log_evidence_at_node(result: InferenceResult, node: int) -> float | None:
    """log of the integral of the node factor times all its incoming messages."""
    return result.node_log_evidence(node)
