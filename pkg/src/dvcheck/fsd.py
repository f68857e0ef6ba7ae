"""FIB-state distribution: per-device tables of local equivalence classes.

Every device keeps a partition of the packet space in which each class maps
to the unique forwarding path its packets take from this device.  A path
records the hops it visits and whether the last hop delivers the packet;
an undelivered path keeps its prefix so that a later change at its last hop
can still find it.  Paths are cut just before the first repeated device.

Tables are built by announcements flowing upstream from every path end.
After that, devices keep them current with three messages: a path update
broadcast from the device where forwarding changed, and a request/reply pair
a device uses to learn the downstream path of a new rule.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

from .datamodel import LOCAL, NIL, Fib, FibEntry, LinkStateMap, ScriptEvent, Topology, apply_event, apply_fib_update
from .errors import ConfigurationError, ContractViolation, ProtocolError
from .hsa import HeaderSpace
from .sim import FIFO, Simulator


@dataclass(frozen=True)
class LocalPath:
    hops: tuple
    delivered: bool

    def __str__(self):
        s = "".join(self.hops) if all(len(h) == 1 for h in self.hops) else "-".join(self.hops)
        return s if self.delivered else f"{s}:NULL"

    def to_json(self) -> dict:
        return {"hops": list(self.hops), "delivered": self.delivered}


def splice(prefix: tuple, path: LocalPath) -> LocalPath:
    """``prefix`` followed by ``path``, cut before the first repeated device."""
    hops = []
    seen = set()
    for h in tuple(prefix) + path.hops:
        if h in seen:
            return LocalPath(tuple(hops), False)
        seen.add(h)
        hops.append(h)
    return LocalPath(tuple(hops), path.delivered)


@dataclass
class LecEntry:
    space: HeaderSpace
    path: LocalPath


class LecTable:
    """Disjoint classes, at most one per distinct path."""

    def __init__(self, owner: str, width: int, entries=()):
        self.owner = owner
        self.width = width
        self.entries: list[LecEntry] = []
        for e in entries:
            self.set_path(e.space, e.path)

    def set_path(self, space: HeaderSpace, path: LocalPath):
        """Assign ``space`` to ``path``, merging with any class on the same path."""
        if not space:
            return
        kept = []
        merged = space
        for e in self.entries:
            rest = e.space - space
            if e.path == path:
                merged = merged | rest
            elif rest:
                kept.append(LecEntry(rest, e.path))
        kept.append(LecEntry(merged, path))
        kept.sort(key=lambda e: (e.path.hops, e.path.delivered))
        self.entries = kept

    def lookup_path(self, space: HeaderSpace) -> list[tuple[HeaderSpace, LocalPath]]:
        out = []
        for e in self.entries:
            sub = e.space & space
            if sub:
                out.append((sub, e.path))
        return out

    def covered(self) -> HeaderSpace:
        acc = HeaderSpace.empty(self.width)
        for e in self.entries:
            acc = acc | e.space
        return acc

    def path_of(self, packet: int) -> LocalPath | None:
        for e in self.entries:
            if e.space.contains(packet):
                return e.path
        return None

    def to_json(self) -> list:
        return [{"space": e.space.to_strings(), "path": str(e.path)} for e in self.entries]

    def canonical(self) -> dict:
        """Path -> space; two tables are equivalent iff their canonical forms compare equal."""
        return {str(e.path): e.space for e in self.entries}


# --- messages ---------------------------------------------------------------


@dataclass(frozen=True)
class Announce:
    src: str
    dst: str
    space: HeaderSpace
    path: LocalPath

    @property
    def words(self):
        return len(self.space)


@dataclass(frozen=True)
class PathUpdate:
    src: str
    dst: str
    origin: str
    space: HeaderSpace
    path: LocalPath

    @property
    def words(self):
        return len(self.space)


@dataclass(frozen=True)
class Request:
    src: str
    dst: str
    space: HeaderSpace

    @property
    def words(self):
        return len(self.space)


@dataclass(frozen=True)
class Reply:
    src: str
    dst: str
    space: HeaderSpace
    path: LocalPath

    @property
    def words(self):
        return len(self.space)


def first_hop(entry: FibEntry | None) -> str | None:
    """Next device of a rule; multi-member groups follow their first member."""
    if entry is None or entry.group.is_drop:
        return None
    return entry.group.members[0].dev


def _check_fib(fib: Fib):
    for e in fib.entries:
        for m in e.group.members:
            if m.rewrite is not None and not m.rewrite.is_identity:
                raise ConfigurationError(f"{fib.owner}: header rewrites are not supported by FIB-state distribution")


class FsdNode:
    def __init__(self, device: str, fsd: "FsdNetwork"):
        self.device = device
        self.fsd = fsd
        self.topo = fsd.topo
        self.width = fsd.topo.width
        self.fib = fsd.fibs.get(device) or Fib(device, "", self.width)
        self.table = LecTable(device, self.width)
        self.pending: dict[str, HeaderSpace] = {}  # next hop -> space still awaited

    @property
    def links(self) -> LinkStateMap:
        return self.fsd.links

    def _link_up(self, other: str) -> bool:
        return self.links.link_up(self.topo, self.device, other)

    def _rule_outcome(self, entry: FibEntry | None) -> LocalPath | str:
        """Path ending here, or the next hop whose path is needed."""
        nh = first_hop(entry)
        if nh is None or nh == NIL:
            return LocalPath((self.device,), False)
        if nh == LOCAL:
            return LocalPath((self.device,), True)
        if not self.topo.has_device(nh) or not self._link_up(nh):
            return LocalPath((self.device,), False)
        return nh

    def _upstreams(self) -> list[str]:
        return [u for u in self.topo.predecessors(self.device) if self.links.link_up(self.topo, u, self.device)]

    def _announce(self, space, path) -> list:
        return [Announce(self.device, u, space, path) for u in self._upstreams()]

    def _broadcast(self, space: HeaderSpace, path: LocalPath) -> list:
        self.fsd.broadcasts.append((self.device, space, path))
        return [PathUpdate(self.device, d, self.device, space, path) for d in self.fsd.component(self.device) if d != self.device]

    # -- local events -------------------------------------------------------

    def on_local(self, event) -> list:
        kind, payload = event
        if kind == "init":
            return self._init_seed()
        if kind == "rule":
            self.fib, changed = payload
            return self._rules_changed(changed)
        if kind == "link_down":
            return self._link_down(payload)
        if kind == "link_up":
            return self._link_up_event(payload)
        raise ConfigurationError(f"unknown FSD event {kind!r}")

    def _init_seed(self) -> list:
        out = []
        for sub, entry in self.fib.lookup_entries(HeaderSpace.full(self.width)):
            res = self._rule_outcome(entry)
            if isinstance(res, LocalPath):
                self.table.set_path(sub, res)
                out += self._announce(sub, res)
        return out

    def _resolve(self, space: HeaderSpace) -> list:
        """Install end-of-path pieces of ``space`` and request the others."""
        out = []
        for sub, entry in self.fib.lookup_entries(space):
            res = self._rule_outcome(entry)
            if isinstance(res, LocalPath):
                self.table.set_path(sub, res)
                out += self._broadcast(sub, res)
            else:
                self.pending[res] = self.pending.get(res, HeaderSpace.empty(self.width)) | sub
                out.append(Request(self.device, res, sub))
        return out

    def _rules_changed(self, changed: HeaderSpace) -> list:
        if not changed:
            return []
        return self._resolve(changed)

    def _link_down(self, other: str) -> list:
        out = []
        for sub, entry in self.fib.lookup_entries(HeaderSpace.full(self.width)):
            if first_hop(entry) == other:
                path = LocalPath((self.device,), False)
                self.table.set_path(sub, path)
                out += self._broadcast(sub, path)
        return out

    def _link_up_event(self, other: str) -> list:
        space = HeaderSpace.empty(self.width)
        for sub, entry in self.fib.lookup_entries(HeaderSpace.full(self.width)):
            if first_hop(entry) == other:
                space = space | sub
        return self._resolve(space) if space else []

    # -- messages -------------------------------------------------------------

    def handle(self, msg) -> list:
        if isinstance(msg, Announce):
            return self._on_announce(msg)
        if isinstance(msg, PathUpdate):
            return self._on_path_update(msg)
        if isinstance(msg, Request):
            return [Reply(self.device, msg.src, sub, path) for sub, path in self.table.lookup_path(msg.space)]
        if isinstance(msg, Reply):
            return self._on_reply(msg)
        raise ProtocolError(f"unexpected message {msg!r}")

    def _on_announce(self, msg: Announce) -> list:
        out = []
        if not self._link_up(msg.src):
            return out
        for sub, entry in self.fib.lookup_entries(msg.space):
            if first_hop(entry) != msg.src:
                continue
            path = splice((self.device,), msg.path)
            if self.table.lookup_path(sub) == [(sub, path)]:
                continue
            self.table.set_path(sub, path)
            if self.fsd.hop_guard(path):
                out += self._announce(sub, path)
        return out

    def _on_path_update(self, msg: PathUpdate) -> list:
        # receivers patch dependent classes and never re-broadcast
        for e in list(self.table.entries):
            if msg.origin not in e.path.hops:
                continue
            sub = e.space & msg.space
            if not sub:
                continue
            i = e.path.hops.index(msg.origin)
            self.table.set_path(sub, splice(e.path.hops[:i], msg.path))
        return []

    def _on_reply(self, msg: Reply) -> list:
        want = self.pending.get(msg.src)
        if want is None or not (msg.space <= want):
            raise ProtocolError(f"{self.device}: unsolicited reply from {msg.src} for {msg.space}")
        rest = want - msg.space
        if rest:
            self.pending[msg.src] = rest
        else:
            del self.pending[msg.src]
        # the rule may have moved on while the request was in flight
        out = []
        for sub, entry in self.fib.lookup_entries(msg.space):
            if first_hop(entry) != msg.src:
                continue
            path = splice((self.device,), msg.path)
            self.table.set_path(sub, path)
            out += self._broadcast(sub, path)
        return out


class FsdNetwork:
    """One CP's FIB-state distribution instance over a topology."""

    def __init__(self, topo: Topology, fibs: dict[str, Fib], links: LinkStateMap | None = None,
                 delivery: str = FIFO, seed: int = 0):
        for f in fibs.values():
            _check_fib(f)
        self.topo = topo
        self.fibs = dict(fibs)
        self.links = links or LinkStateMap()
        self.broadcasts: list = []
        self.loops: dict[str, HeaderSpace] = {}
        self.nodes = {d: FsdNode(d, self) for d in topo.devices}
        self.sim = Simulator(self.nodes, delivery=delivery, seed=seed, width=topo.width)
        self._components: dict | None = None
        self.initialized = False

    def component(self, device: str) -> list[str]:
        if self._components is None:
            self._components = {}
            for d in self.topo.devices:
                if d in self._components:
                    continue
                comp = [d]
                seen = {d}
                queue = deque([d])
                while queue:
                    v = queue.popleft()
                    for w in self.topo.successors(v) + self.topo.predecessors(v):
                        if w not in seen and (self.links.link_up(self.topo, v, w) or self.links.link_up(self.topo, w, v)):
                            seen.add(w)
                            comp.append(w)
                            queue.append(w)
                comp.sort()
                for v in comp:
                    self._components[v] = comp
        return self._components[device]

    def hop_guard(self, path: LocalPath) -> bool:
        return len(path.hops) <= len(self.topo.devices)

    def _run(self, events):
        self.sim.begin_event()
        for key, ev in events:
            self.sim.inject(key, ev)
        self.sim.quiesce(bound=8 * len(self.nodes) * self.sim.max_delay + 16)
        self.sim.end_event()
        for n in self.nodes.values():
            if n.pending:
                raise ProtocolError(f"{n.device}: replies never covered {n.pending}")

    def initialize(self):
        self._run([(d, ("init", None)) for d in self.topo.devices])
        full = HeaderSpace.full(self.topo.width)
        for d, n in self.nodes.items():
            gap = full - n.table.covered()
            if gap:
                # packets no announcement reached are caught in a forwarding loop
                self.loops[d] = gap
                n.table.set_path(gap, LocalPath((d,), False))
        self.initialized = True
        return self

    def rule_change(self, device: str, op: str, entry: FibEntry) -> int:
        """Apply an insert/modify/delete at ``device``; returns broadcasts sent."""
        old = self.fibs.get(device) or Fib(device, "", self.topo.width)
        new, changed = apply_fib_update(old, op, entry)
        _check_fib(new)
        self.fibs[device] = new
        before = len(self.broadcasts)
        self._run([(device, ("rule", (new, changed)))])
        return len(self.broadcasts) - before

    def replace_rule(self, device: str, old_match: HeaderSpace, entry: FibEntry) -> int:
        """Swap one rule for another with a different match, as a single event."""
        old = self.fibs.get(device) or Fib(device, "", self.topo.width)
        mid, c1 = apply_fib_update(old, "delete", FibEntry(old_match))
        new, c2 = apply_fib_update(mid, "insert", entry)
        _check_fib(new)
        self.fibs[device] = new
        before = len(self.broadcasts)
        self._run([(device, ("rule", (new, c1 | c2)))])
        return len(self.broadcasts) - before

    def apply(self, event: ScriptEvent) -> int:
        """Run one script event to quiescence; returns broadcasts sent."""
        if event.kind in ("link_down", "link_up"):
            return self.set_link(event.link_id, event.kind == "link_up")
        vfibs, _, changed = apply_event(replace(event, cp="_"), {"_": dict(self.fibs)}, self.links, self.topo)
        new = vfibs["_"][event.device]
        _check_fib(new)
        self.fibs[event.device] = new
        before = len(self.broadcasts)
        self._run([(event.device, ("rule", (new, changed)))])
        return len(self.broadcasts) - before

    def set_link(self, link_id: str, up: bool) -> int:
        links = self.topo.links_with_id(link_id)
        if not links:
            raise ConfigurationError(f"unknown link {link_id!r}")
        self.links = self.links.with_state(link_id, up)
        self._components = None
        kind = "link_up" if up else "link_down"
        events = []
        for link in links:
            events.append((link.src, (kind, link.dst)))
        before = len(self.broadcasts)
        self._run(events)
        return len(self.broadcasts) - before

    def query(self, device: str, space: HeaderSpace) -> list[tuple[HeaderSpace, LocalPath | None]]:
        if not self.sim.quiescent:
            raise ContractViolation("FSD query while messages are in flight")
        table = self.nodes[device].table
        out = [(s, p) for s, p in table.lookup_path(space)]
        rest = space - table.covered()
        if rest:
            out.append((rest, None))
        return out

    def tables(self) -> dict[str, LecTable]:
        return {d: n.table for d, n in self.nodes.items()}

    def dump(self) -> dict:
        return {d: n.table.to_json() for d, n in sorted(self.nodes.items())}


def init_tables(topo: Topology, fibs: dict[str, Fib], links: LinkStateMap | None = None) -> dict[str, LecTable]:
    """Tables as built from scratch by the announcement wave."""
    return FsdNetwork(topo, fibs, links).initialize().tables()
