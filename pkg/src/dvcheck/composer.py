"""Control-plane composition.

Given which packets each CP is verified for, :func:`compose` picks, for
every packet of a CPSpec space, the most preferred CP that is verified for
it; whatever no CP covers is dropped.  The :class:`Composer` actor adds
fast-reroute through pre-verified virtual CPs and route-flap style damping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .datamodel import Fib, FibEntry, NextHop, NextHopGroup, Topology
from .errors import ConfigurationError
from .hsa import HeaderSpace

DROP = "drop"
ALLOW, SUPPRESS = "allow", "suppress"
ALTERNATE, TUNNEL, CROSS_CP = "alternate-nexthop", "tunnel", "cross-cp"


@dataclass
class VerificationResult:
    """``verified[(cp, source)]``: packets of the CPSpec space the CP delivers correctly."""

    verified: dict = field(default_factory=dict)

    def get(self, cp: str, source: str, width: int) -> HeaderSpace:
        return self.verified.get((cp, source), HeaderSpace.empty(width))

    def set(self, cp: str, source: str, space: HeaderSpace):
        self.verified[(cp, source)] = space


@dataclass
class CpAssignment:
    partition: list  # [(HeaderSpace, cp id or DROP)]

    def cp_for(self, packet: int) -> str | None:
        for space, cp in self.partition:
            if space.contains(packet):
                return cp
        return None

    def space_of(self, cp: str) -> HeaderSpace | None:
        for space, c in self.partition:
            if c == cp:
                return space
        return None

    def same_as(self, other: "CpAssignment") -> bool:
        mine = {cp: s for s, cp in self.partition}
        theirs = {cp: s for s, cp in other.partition}
        return mine.keys() == theirs.keys() and all(mine[k] == theirs[k] for k in mine)

    def to_json(self) -> list:
        return [{"space": s.to_strings(), "cp": cp} for s, cp in self.partition]


def compose(space: HeaderSpace, ranked: list[str], verified: dict[str, HeaderSpace]) -> CpAssignment:
    """Greedy preference-ordered cover of ``space``; the residue goes to drop."""
    rest = space
    parts = []
    for cp in ranked:
        ok = verified.get(cp)
        if ok is None:
            continue
        got = rest & ok
        if got:
            parts.append((got, cp))
            rest = rest - got
    if rest:
        parts.append((rest, DROP))
    return CpAssignment(parts)


def elect_decider(ingresses) -> str:
    """Every ingress adopts the assignment computed by the smallest id."""
    ingresses = list(ingresses)
    if not ingresses:
        raise ConfigurationError("need at least one ingress to elect a decider")
    return min(ingresses)


# --- fast reroute ---------------------------------------------------------


@dataclass
class VirtualCp:
    id: str
    kind: str
    base: str
    delta: dict  # device -> [FibEntry] that differ from the base CP
    vfibs: dict  # device -> Fib: base CP with ``delta`` overlaid

    @property
    def is_empty(self) -> bool:
        return not any(self.delta.values())


def overlay(fib: Fib, entries: list[FibEntry], cp: str) -> Fib:
    """``fib`` with the packets of ``entries`` re-pointed to their groups."""
    if not entries:
        return Fib(fib.owner, cp, fib.width, fib.entries)
    covered = HeaderSpace.empty(fib.width)
    for e in entries:
        covered = covered | e.match
    kept = []
    for e in fib.entries:
        rest = e.match - covered
        if rest:
            kept.append(FibEntry(rest, e.group, e.condition))
    return Fib(fib.owner, cp, fib.width, tuple(kept) + tuple(entries))


def _replace_member(group: NextHopGroup, old: str, new: str) -> NextHopGroup:
    return NextHopGroup(group.mode, tuple(NextHop(new, m.rewrite) if m.dev == old else m for m in group.members))


def register_frr(base_cp: str, kind: str, params: dict, topo: Topology, vfibs: dict,
                 vid: str | None = None) -> VirtualCp:
    """Synthesize the virtual CP of a protection mechanism for ``base_cp``.

    ``alternate-nexthop``: ``{"alternates": {device: {primary: alternate}}}``.
    ``tunnel``: ``{"path": [B, X, ..., C]}`` re-routes B's traffic for C
    along the path.  ``cross-cp``: ``{"other": cp}`` takes the other CP's
    next hops wherever they differ.
    """
    base = vfibs.get(base_cp)
    if base is None:
        raise ConfigurationError(f"unknown base CP {base_cp!r}")
    vid = vid or f"{base_cp}~{kind}"
    width = topo.width
    delta: dict[str, list[FibEntry]] = {}
    if kind == ALTERNATE:
        for dev, alts in params.get("alternates", {}).items():
            fib = base.get(dev, Fib(dev, base_cp, width))
            for e in fib.entries:
                g = e.group
                for primary, alt in alts.items():
                    if primary in g.devices and alt != primary:
                        g = _replace_member(g, primary, alt)
                if g != e.group:
                    delta.setdefault(dev, []).append(FibEntry(e.match, g))
    elif kind == TUNNEL:
        path = list(params.get("path", []))
        if len(path) < 3:
            raise ConfigurationError("tunnel path needs a head, at least one transit device and a tail")
        for a, b in zip(path, path[1:]):
            if topo.link(a, b) is None:
                raise ConfigurationError(f"tunnel path not in topology: no link {a}->{b}")
        head, tail = path[0], path[-1]
        affected = HeaderSpace.empty(width)
        for e in base.get(head, Fib(head, base_cp, width)).entries:
            if tail in e.group.devices:
                affected = affected | e.match
                delta.setdefault(head, []).append(FibEntry(e.match, _replace_member(e.group, tail, path[1])))
        if affected:
            for a, b in zip(path[1:-1], path[2:]):
                delta.setdefault(a, []).append(FibEntry(affected, NextHopGroup.of(b)))
    elif kind == CROSS_CP:
        other = vfibs.get(params.get("other"))
        if other is None:
            raise ConfigurationError(f"cross-cp FRR references unknown CP {params.get('other')!r}")
        for dev in topo.devices:
            mine = base.get(dev, Fib(dev, base_cp, width))
            theirs = other.get(dev, Fib(dev, "", width))
            for sub, e in theirs.lookup_entries(HeaderSpace.full(width)):
                if e is None:
                    continue
                for piece, g in mine.lookup(sub):
                    if g != e.group:
                        delta.setdefault(dev, []).append(FibEntry(piece, e.group))
    else:
        raise ConfigurationError(f"unknown FRR kind {kind!r}")
    delta = {d: es for d, es in delta.items() if es}
    merged = {}
    for dev in topo.devices:
        merged[dev] = overlay(base.get(dev, Fib(dev, base_cp, width)), delta.get(dev, []), vid)
    return VirtualCp(vid, kind, base_cp, delta, merged)


# --- damping ----------------------------------------------------------------


@dataclass
class DampingState:
    increment: float = 1000.0
    suppress_limit: float = 3000.0
    half_life: float = 300.0  # logical ticks; one tick stands for one second
    reuse_limit: float = 1500.0
    penalty: float = 0.0
    suppressed: bool = False
    last_update: float | None = None

    def decay(self, now: float) -> float:
        if self.last_update is not None and now > self.last_update:
            self.penalty *= math.pow(2.0, -(now - self.last_update) / self.half_life)
        self.last_update = now
        if self.suppressed and self.penalty < self.reuse_limit:
            self.suppressed = False
        return self.penalty

    def to_json(self) -> dict:
        return {"penalty": self.penalty, "suppressed": self.suppressed, "last_update": self.last_update}


def damp(state: DampingState, now: float) -> str:
    """Record one assignment update at ``now``; return allow or suppress."""
    state.decay(now)
    state.penalty += state.increment
    if state.penalty > state.suppress_limit:
        state.suppressed = True
    return SUPPRESS if state.suppressed else ALLOW


# --- unified data plane -------------------------------------------------------


@dataclass
class UnifiedTables:
    """Selection table (space -> table id) and one match/action table per CP."""

    device: str
    selection: list  # [(HeaderSpace, table id)]
    tables: dict  # table id -> Fib; DROP maps to an empty table

    def lookup(self, packet: int) -> tuple[str | None, NextHopGroup]:
        for space, tid in self.selection:
            if space.contains(packet):
                return tid, _lookup_packet(self.tables[tid], packet)
        return None, NextHopGroup.drop()

    def to_json(self) -> dict:
        return {
            "device": self.device,
            "selection": [{"space": s.to_strings(), "table": t} for s, t in self.selection],
            "tables": {t: [{"match": str(e.match), "group": str(e.group)} for e in f.entries]
                       for t, f in sorted(self.tables.items())},
        }


def _lookup_packet(fib: Fib, packet: int) -> NextHopGroup:
    for e in fib.entries:
        if e.match.contains(packet):
            return e.group
    return NextHopGroup.drop()


def emit_tables(assignment: CpAssignment, device_fibs: dict[str, Fib], device: str, width: int) -> UnifiedTables:
    """``device_fibs`` maps cp id to this device's vFIB for that CP."""
    selection = []
    tables = {}
    for space, cp in assignment.partition:
        selection.append((space, cp))
        if cp == DROP:
            tables[DROP] = Fib(device, DROP, width)
        else:
            src = device_fibs.get(cp, Fib(device, cp, width))
            tables[cp] = Fib(device, cp, width, src.entries)
    return UnifiedTables(device, selection, tables)


# --- the composer actor ----------------------------------------------------------


class Composer:
    """Per-CPSpec composition state at the elected decider.

    Verification results arrive through :meth:`on_result`.  Assignment
    changes pass through damping; a suppressed space keeps its last
    assignment.  :meth:`on_link_failure` switches a base CP's traffic to its
    virtual CP immediately, but only within the virtual CP's verified space.
    """

    def __init__(self, space: HeaderSpace, ranked: list[str], ingresses=(), damping: DampingState | None = None):
        self.space = space
        self.ranked = list(ranked)
        self.ingresses = sorted(ingresses)
        self.leader = elect_decider(self.ingresses) if self.ingresses else None
        self.verified: dict[str, HeaderSpace] = {}
        self.virtual: dict[str, list[str]] = {}  # base cp -> virtual cp ids
        self.damping = damping or DampingState()
        self.assignment = CpAssignment([(space, DROP)] if space else [])
        self.history: list = []

    def add_virtual(self, vcp: VirtualCp, verified: HeaderSpace):
        self.virtual.setdefault(vcp.base, []).append(vcp.id)
        self.verified[vcp.id] = verified

    def ranking(self) -> list[str]:
        """Ranked CPs, each followed by its virtual CPs as fallbacks."""
        out = []
        for cp in self.ranked:
            out.append(cp)
            out.extend(self.virtual.get(cp, []))
        return out

    def _compute(self) -> CpAssignment:
        order = self.ranking()
        return compose(self.space, order, {cp: self.verified[cp] for cp in order if cp in self.verified})

    def start(self, verified: dict[str, HeaderSpace]) -> CpAssignment:
        """Initial composition; not counted as an update for damping."""
        for cp, v in verified.items():
            self.verified[cp] = v & self.space
        self.assignment = self._compute()
        return self.assignment

    def on_result(self, cp: str, verified: HeaderSpace, now: float) -> str | None:
        """Returns None when nothing changed, else the damping decision."""
        self.verified[cp] = verified & self.space
        new = self._compute()
        if new.same_as(self.assignment):
            return None
        decision = damp(self.damping, now)
        if decision == ALLOW:
            self.assignment = new
        self.history.append((now, decision, new.to_json()))
        return decision

    def poll(self, now: float) -> bool:
        """Re-admit a suppressed recomposition once the penalty has decayed."""
        was = self.damping.suppressed
        self.damping.decay(now)
        if was and not self.damping.suppressed:
            new = self._compute()
            if not new.same_as(self.assignment):
                self.assignment = new
                self.history.append((now, "release", new.to_json()))
                return True
        return False

    def on_link_failure(self, cp: str, now: float) -> CpAssignment:
        vids = self.virtual.get(cp, [])
        parts = []
        for space, owner in self.assignment.partition:
            if owner != cp:
                parts.append((space, owner))
                continue
            rest = space
            for vid in vids:
                moved = rest & self.verified.get(vid, HeaderSpace.empty(space.width))
                if moved:
                    parts.append((moved, vid))
                    rest = rest - moved
            if rest:
                parts.append((rest, owner))
        self.assignment = CpAssignment(parts)
        self.history.append((now, "failover", self.assignment.to_json()))
        return self.assignment

    def adopt(self) -> dict[str, CpAssignment]:
        """The leader's assignment, installed verbatim at every ingress."""
        return {i: CpAssignment(list(self.assignment.partition)) for i in self.ingresses}

    def report(self) -> dict:
        return {
            "leader": self.leader,
            "assignment": self.assignment.to_json(),
            "verified": {cp: s.to_strings() for cp, s in sorted(self.verified.items())},
            "damping": self.damping.to_json(),
        }
