"""The DV protocol: per-node violation sets and upstream delta propagation.

Every DV-node ``x`` keeps ``H``, the set of packets it cannot deliver in a
way that satisfies the requirement, plus a copy of ``H`` for each of its
DV successors.  When a FIB, a link or a successor report changes, the node
recomputes ``H`` and sends the symmetric difference to its upstreams, but
only if something flipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

from .datamodel import ALL, NIL, Fib, FibEntry, LinkStateMap, NextHop, Topology
from .dvnet import DvNetwork, DvNode
from .errors import ConfigurationError, ContractViolation
from .hsa import HeaderSpace, inverse_image
from .sim import FIFO, SERIAL, Metrics, Simulator

PERMISSIVE, STRICT = "permissive", "strict"


@dataclass(frozen=True)
class DeltaMessage:
    src: DvNode
    dst: DvNode
    delta: HeaderSpace

    @property
    def words(self) -> int:
        return len(self.delta)


@dataclass
class Options:
    """Extension switches shared by every node of one verification instance."""

    anycast: str = PERMISSIVE
    link_state_check: bool = True
    coverage: bool = False

    def __post_init__(self):
        if self.anycast not in (PERMISSIVE, STRICT):
            raise ConfigurationError(f"anycast mode must be permissive or strict, got {self.anycast!r}")


class DvNodeState:
    """One DV-node actor.  Owns its records; talks only through messages."""

    def __init__(self, node: DvNode, net: DvNetwork, topo: Topology, fib: Fib | None,
                 links: LinkStateMap, options: Options):
        self.node = node
        self.topo = topo
        self.width = topo.width
        self.sink = net.is_sink(node)
        self.succ = dict(net.edges.get(node, {}))  # device -> DvNode
        self.upstreams = list(net.predecessors(node))
        self.fib = fib or Fib(node.device, "", self.width)
        self.links = links
        self.options = options
        self.records = {s: HeaderSpace.empty(self.width) for s in self.succ.values()}
        self.H = HeaderSpace.empty(self.width)

    @property
    def device(self) -> str:
        return self.node.device

    # -- local verification function ------------------------------------

    def _member_violation(self, m: HeaderSpace, nh: NextHop) -> HeaderSpace:
        succ = None if nh.dev == NIL else self.succ.get(nh.dev)
        if succ is None:
            return m
        if self.options.link_state_check and not self.links.link_up(self.topo, self.device, nh.dev):
            return m
        rec = self.records[succ]
        if nh.rewrite is not None and not nh.rewrite.is_identity:
            rec = inverse_image(nh.rewrite, rec)
        return m & rec

    def entry_violation(self, m: HeaderSpace, entry: FibEntry | None) -> HeaderSpace:
        if entry is None or entry.group.is_drop:
            return m
        group = entry.group
        devs = set(group.devices)
        if entry.condition is not None:
            c = entry.condition
            required = c.primary if self.links.link_up(self.topo, self.device, c.primary) else c.backup
            if devs != {required}:
                return m
        if self.options.coverage and not set(self.succ) <= devs:
            return m
        parts = [self._member_violation(m, nh) for nh in group.members]
        strict = group.mode == ALL or self.options.anycast == STRICT or self.options.coverage
        if strict:
            return reduce(lambda a, b: a | b, parts)
        return reduce(lambda a, b: a & b, parts)

    def recompute(self) -> HeaderSpace:
        if self.sink:
            return HeaderSpace.empty(self.width)
        h = HeaderSpace.empty(self.width)
        for sub, entry in self.fib.lookup_entries(HeaderSpace.full(self.width)):
            h = h | self.entry_violation(sub, entry)
        return h

    def _refresh(self) -> list[DeltaMessage]:
        new = self.recompute()
        delta = new ^ self.H
        if not delta:
            return []
        self.H = new
        return [DeltaMessage(self.node, u, delta) for u in self.upstreams]

    # -- actor interface --------------------------------------------------

    def handle(self, msg: DeltaMessage) -> list[DeltaMessage]:
        self.records[msg.src] = self.records[msg.src] ^ msg.delta
        return self._refresh()

    def on_local(self, event) -> list[DeltaMessage]:
        """``event`` is ``("fib", Fib)``, ``("links", LinkStateMap)`` or ``("init", None)``."""
        kind, payload = event
        if kind == "fib":
            self.fib = payload
        elif kind == "links":
            self.links = payload
        elif kind != "init":
            raise ConfigurationError(f"unknown local event {kind!r}")
        return self._refresh()

    def record_words(self) -> int:
        return sum(len(r) for r in self.records.values())


def contract_violation(state: DvNodeState) -> HeaderSpace:
    """Packets on which the node's next-hop set differs from all its DAG successors."""
    full = HeaderSpace.full(state.width)
    if state.sink:
        return HeaderSpace.empty(state.width)
    want = set(state.succ)
    bad = HeaderSpace.empty(state.width)
    for sub, group in state.fib.lookup(full):
        if set(group.devices) != want:
            bad = bad | sub
    return bad


def local_contract(state: DvNodeState, space: HeaderSpace | None = None) -> bool:
    """True iff ``N_p(x) == C(x)`` for every packet of ``space`` (default: all)."""
    bad = contract_violation(state)
    if space is not None:
        bad = bad & space
    return bad.is_empty()


class DvProtocol:
    """All DV-node actors of one DV-Network, driven by a :class:`Simulator`."""

    def __init__(self, net: DvNetwork, topo: Topology, fibs: dict[str, Fib],
                 links: LinkStateMap | None = None, options: Options | None = None,
                 delivery: str = FIFO, seed: int = 0, executor: str = SERIAL, max_delay: int = 3):
        self.net = net
        self.topo = topo
        self.options = options or Options()
        self.links = links or LinkStateMap()
        self.fibs = dict(fibs)
        self.nodes = {n: DvNodeState(n, net, topo, self.fibs.get(n.device), self.links, self.options)
                      for n in net.nodes}
        self.sim = Simulator(self.nodes, delivery=delivery, seed=seed, width=topo.width,
                             executor=executor, max_delay=max_delay)
        self.initialized = False
        self.init_metrics: Metrics | None = None

    def initialize(self) -> Metrics:
        """Bottom-up wave from empty records; afterwards counters restart at zero."""
        order = self.net.topological_order() if not self.net.is_empty else []
        self.sim.begin_event()
        for n in reversed(order):
            self.sim.inject(n, ("init", None))
        self.sim.quiesce()
        self.sim.end_event()
        self.init_metrics = self.sim.metrics
        self.sim.reset_metrics()
        self.initialized = True
        return self.init_metrics

    def _ensure_init(self):
        if not self.initialized:
            self.initialize()

    def update_fib(self, device: str, fib: Fib) -> int:
        """Install a new FIB at ``device`` and run to quiescence; returns messages sent."""
        self._ensure_init()
        self.fibs[device] = fib
        self.sim.begin_event()
        for n in self.net.nodes_of(device):
            self.sim.inject(n, ("fib", fib))
        self.sim.quiesce()
        self.sim.end_event()
        return self.sim.metrics.per_event_messages[-1]

    def update_links(self, links: LinkStateMap) -> int:
        self._ensure_init()
        self.links = links
        self.sim.begin_event()
        for n in self.net.nodes:
            self.sim.inject(n, ("links", links))
        self.sim.quiesce()
        self.sim.end_event()
        return self.sim.metrics.per_event_messages[-1]

    def inject_fib(self, device: str, fib: Fib):
        """Schedule a FIB change without waiting for quiescence."""
        self.fibs[device] = fib
        for n in self.net.nodes_of(device):
            self.sim.inject(n, ("fib", fib))

    def inject_links(self, links: LinkStateMap):
        self.links = links
        for n in self.net.nodes:
            self.sim.inject(n, ("links", links))

    def quiesce(self) -> int:
        return self.sim.quiesce()

    @property
    def quiescent(self) -> bool:
        return self.sim.quiescent

    @property
    def metrics(self) -> Metrics:
        self.sim.metrics.per_node_record_bytes = {
            str(n): s.record_words() * self.sim.word_bytes for n, s in self.nodes.items()
        }
        return self.sim.metrics

    def root_h(self) -> HeaderSpace:
        if self.net.is_empty:
            return HeaderSpace.full(self.topo.width)
        return self.nodes[self.net.root].H

    def verdict(self, query: HeaderSpace) -> tuple[HeaderSpace, HeaderSpace]:
        """(verified, violating) split of ``query`` at the root."""
        if not self.quiescent:
            raise ContractViolation("verdict requested while messages are in flight")
        self._ensure_init()
        h = self.root_h()
        return query - h, query & h

    def snapshot(self) -> dict[str, list[str]]:
        """Pure copy of every node's H, keyed by node name."""
        return {str(n): s.H.to_strings() for n, s in sorted(self.nodes.items(), key=lambda kv: str(kv[0]))}

    def local_verdict(self, query: HeaderSpace) -> HeaderSpace:
        """Violations implied by local contracts alone (coverage mode, no rewrites)."""
        bad = HeaderSpace.empty(self.topo.width)
        for s in self.nodes.values():
            bad = bad | contract_violation(s)
        return query & bad
