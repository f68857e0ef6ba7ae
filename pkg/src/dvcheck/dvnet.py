"""DV-Networks: rooted DAGs of (device, automaton-state) nodes.

:func:`build_product` walks the topology in lock-step with the requirement
automaton (path-prefix product), keeps only nodes that can still reach an
accepting node, and rejects cyclic products.  :func:`build_shortest_path`
uses hop-count distance to the destination set as the dual variable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .automata import NumberedAutomaton, PathDfa
from .datamodel import Topology
from .errors import BudgetExceeded, ConfigurationError, NotConvertibleError

DEFAULT_NODE_BUDGET = 100_000


class DvNode(NamedTuple):
    device: str
    state: int

    def __str__(self):
        return f"{self.device}#{self.state}"


@dataclass
class DvNetwork:
    root: DvNode | None
    nodes: list[DvNode] = field(default_factory=list)
    sinks: frozenset = frozenset()
    edges: dict = field(default_factory=dict)  # node -> {device: successor}
    upstream: dict = field(default_factory=dict)  # node -> [predecessors]
    kind: str = "product"

    @property
    def is_empty(self) -> bool:
        return self.root is None

    def successor(self, node: DvNode, device: str) -> DvNode | None:
        """DV-node reached from ``node`` by forwarding to ``device``; None is nil."""
        return self.edges.get(node, {}).get(device)

    def successors(self, node: DvNode) -> list[DvNode]:
        return list(self.edges.get(node, {}).values())

    def predecessors(self, node: DvNode) -> list[DvNode]:
        return self.upstream.get(node, [])

    def is_sink(self, node: DvNode) -> bool:
        return node in self.sinks

    def topological_order(self) -> list[DvNode]:
        order = _toposort(self.nodes, self.edges)
        if order is None:
            raise NotConvertibleError("DV-Network is not acyclic", _find_cycle(self.nodes, self.edges))
        return order

    def nodes_of(self, device: str) -> list[DvNode]:
        return [n for n in self.nodes if n.device == device]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "root": str(self.root) if self.root else None,
            "nodes": [[n.device, n.state] for n in self.nodes],
            "sinks": sorted(str(n) for n in self.sinks),
            "edges": [[str(a), str(b)] for a in self.nodes for b in self.successors(a)],
        }


def _toposort(nodes, edges) -> list | None:
    indeg = {n: 0 for n in nodes}
    for a in nodes:
        for b in edges.get(a, {}).values():
            indeg[b] += 1
    queue = deque(n for n in nodes if indeg[n] == 0)
    order = []
    while queue:
        n = queue.popleft()
        order.append(n)
        for b in edges.get(n, {}).values():
            indeg[b] -= 1
            if indeg[b] == 0:
                queue.append(b)
    return order if len(order) == len(nodes) else None


def _find_cycle(nodes, edges) -> list:
    color = {n: 0 for n in nodes}
    parent = {}
    for start in nodes:
        if color[start]:
            continue
        stack = [(start, iter(edges.get(start, {}).values()))]
        color[start] = 1
        while stack:
            n, it = stack[-1]
            for b in it:
                if color.get(b) == 1:
                    cycle = [b]
                    cur = n
                    while cur != b:
                        cycle.append(cur)
                        cur = parent[cur]
                    cycle.append(b)
                    return list(reversed(cycle))
                if color.get(b) == 0:
                    color[b] = 1
                    parent[b] = n
                    stack.append((b, iter(edges.get(b, {}).values())))
                    break
            else:
                color[n] = 2
                stack.pop()
    return []


def _finish(root, nodes, edges, sinks, kind) -> DvNetwork:
    """Prune nodes that cannot reach a sink, then check acyclicity."""
    rev: dict = {n: [] for n in nodes}
    for a in nodes:
        for b in edges[a].values():
            rev[b].append(a)
    alive = set(sinks)
    stack = list(sinks)
    while stack:
        n = stack.pop()
        for p in rev[n]:
            if p not in alive:
                alive.add(p)
                stack.append(p)
    if root not in alive:
        return DvNetwork(None, kind=kind)
    kept = [n for n in nodes if n in alive]
    kept_edges = {n: {d: b for d, b in edges[n].items() if b in alive} for n in kept}
    order = _toposort(kept, kept_edges)
    if order is None:
        cycle = _find_cycle(kept, kept_edges)
        raise NotConvertibleError(
            "requirement is not DV-convertible on this topology: product has a cycle "
            + " -> ".join(str(n) for n in cycle),
            cycle,
        )
    upstream = {n: [] for n in kept}
    for a in kept:
        for b in kept_edges[a].values():
            upstream[b].append(a)
    return DvNetwork(root, kept, frozenset(s for s in sinks if s in alive), kept_edges, upstream, kind)


def build_product(topo: Topology, dfa, source: str, budget: int = DEFAULT_NODE_BUDGET) -> DvNetwork:
    """Path-prefix product of ``topo`` and a requirement automaton, rooted at ``source``."""
    if not topo.has_device(source):
        raise ConfigurationError(f"source {source!r} is not in the topology")
    auto = dfa if isinstance(dfa, (PathDfa, NumberedAutomaton)) else NumberedAutomaton(dfa)
    q0 = auto.step(auto.initial, source)
    if auto.is_dead(q0):
        return DvNetwork(None)
    root = DvNode(source, q0)
    nodes = [root]
    seen = {root}
    edges: dict = {}
    sinks = set()
    queue = deque([root])
    while queue:
        n = queue.popleft()
        edges[n] = {}
        if auto.is_accepting(n.state):
            sinks.add(n)
            continue
        for v in topo.successors(n.device):
            q = auto.step(n.state, v)
            if auto.is_dead(q):
                continue
            m = DvNode(v, q)
            edges[n][v] = m
            if m not in seen:
                if len(nodes) >= budget:
                    raise BudgetExceeded(f"DV-Network exceeds {budget} nodes")
                seen.add(m)
                nodes.append(m)
                queue.append(m)
    return _finish(root, nodes, edges, sinks, "product")


def hop_distances(topo: Topology, dests) -> dict[str, int]:
    dist = {d: 0 for d in dests}
    queue = deque(sorted(dests))
    while queue:
        v = queue.popleft()
        for u in topo.predecessors(v):
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def build_shortest_path(topo: Topology, source: str, dests) -> DvNetwork:
    """DAG of shortest-path edges (``dist(u) == dist(v) + 1``) from ``source``."""
    dests = set(dests)
    if not dests:
        raise ConfigurationError("shortest-path construction needs at least one destination")
    for d in dests | {source}:
        if not topo.has_device(d):
            raise ConfigurationError(f"device {d!r} is not in the topology")
    dist = hop_distances(topo, dests)
    if source not in dist:
        return DvNetwork(None, kind="shortest-path")
    root = DvNode(source, 0)
    nodes = [root]
    seen = {root}
    edges: dict = {}
    sinks = set()
    queue = deque([root])
    while queue:
        n = queue.popleft()
        edges[n] = {}
        if n.device in dests:
            sinks.add(n)
            continue
        for v in topo.successors(n.device):
            if dist.get(v) == dist[n.device] - 1:
                m = DvNode(v, 0)
                edges[n][v] = m
                if m not in seen:
                    seen.add(m)
                    nodes.append(m)
                    queue.append(m)
    return _finish(root, nodes, edges, sinks, "shortest-path")


@dataclass
class NodeProjection:
    by_device: dict  # device -> [DvNode]
    downstream: dict  # DvNode -> [DvNode]
    upstream: dict  # DvNode -> [DvNode]

    def count(self, device: str) -> int:
        return len(self.by_device.get(device, []))


def project(net: DvNetwork, topo: Topology) -> NodeProjection:
    by_device: dict = {d: [] for d in topo.devices}
    for n in net.nodes:
        by_device[n.device].append(n)
    return NodeProjection(
        {d: ns for d, ns in by_device.items() if ns},
        {n: net.successors(n) for n in net.nodes},
        {n: list(net.predecessors(n)) for n in net.nodes},
    )
