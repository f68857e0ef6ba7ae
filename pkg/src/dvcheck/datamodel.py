"""Topology, link state and the generic match/action FIB model.

Each FIB entry maps a packet space to a next-hop group.  Groups are tagged
``ANY`` (the packet takes one member) or ``ALL`` (the packet is copied to
every member); an empty group is a drop.  Every member may carry its own
header rewrite.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import ConfigurationError, ValidationError
from .hsa import FieldLayout, HeaderRewrite, HeaderSpace

ANY = "ANY"
ALL = "ALL"
NIL = "OFFNET"  # explicit off-network next hop in files
LOCAL = "LOCAL"  # deliver at this device (used by the FIB-state distribution engine)


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    id: str


class Topology:
    """Devices with labels and directed links.

    Every device carries its identifier as a label.  A bidirectional link in
    a file becomes two directed links sharing one link id, so a single
    ``link_down`` takes both directions out.
    """

    def __init__(self, devices: dict[str, Iterable[str]], links: Iterable[Link], layout: FieldLayout | None = None):
        self.labels: dict[str, frozenset[str]] = {d: frozenset(set(ls) | {d}) for d, ls in devices.items()}
        self.layout = layout or FieldLayout()
        self.links: dict[tuple[str, str], Link] = {}
        self._out: dict[str, list[str]] = {d: [] for d in self.labels}
        self._in: dict[str, list[str]] = {d: [] for d in self.labels}
        for link in links:
            for end in (link.src, link.dst):
                if end not in self.labels:
                    raise ConfigurationError(f"link {link.id} uses undeclared device {end!r}")
            if (link.src, link.dst) in self.links:
                continue
            self.links[(link.src, link.dst)] = link
            self._out[link.src].append(link.dst)
            self._in[link.dst].append(link.src)
        for d in self.labels:
            self._out[d].sort()
            self._in[d].sort()

    @classmethod
    def build(cls, devices, edges, directed: bool = False, width: int = 32, fields=None) -> "Topology":
        """Convenience constructor: ``devices`` ids or ``{id: labels}``, ``edges`` pairs."""
        if not isinstance(devices, dict):
            devices = {d: () for d in devices}
        links = []
        for a, b in edges:
            if directed:
                links.append(Link(a, b, f"{a}->{b}"))
            else:
                lid = f"{a}-{b}"
                links += [Link(a, b, lid), Link(b, a, lid)]
        return cls(devices, links, FieldLayout(width, fields))

    @classmethod
    def from_json(cls, data: dict) -> "Topology":
        layout = FieldLayout(int(data.get("width", 32)), data.get("fields") or {})
        devices = {}
        for d in data["devices"]:
            if isinstance(d, str):
                devices[d] = ()
            else:
                devices[d["id"]] = tuple(d.get("labels", ()))
        directed = bool(data.get("directed", False))
        links = []
        for a, b in data.get("links", []):
            if directed:
                links.append(Link(a, b, f"{a}->{b}"))
            else:
                lid = f"{a}-{b}"
                links += [Link(a, b, lid), Link(b, a, lid)]
        return cls(devices, links, layout)

    def to_json(self) -> dict:
        ids = sorted({l.id for l in self.links.values()})
        pairs = []
        seen = set()
        for (a, b), link in sorted(self.links.items()):
            if link.id in seen:
                continue
            seen.add(link.id)
            pairs.append([a, b])
        directed = all("->" in i for i in ids) and bool(ids)
        return {
            "width": self.layout.width,
            "fields": self.layout.to_json(),
            "directed": directed,
            "devices": [{"id": d, "labels": sorted(ls - {d})} for d, ls in sorted(self.labels.items())],
            "links": pairs,
        }

    @property
    def devices(self) -> list[str]:
        return sorted(self.labels)

    @property
    def width(self) -> int:
        return self.layout.width

    def has_device(self, d: str) -> bool:
        return d in self.labels

    def successors(self, d: str) -> list[str]:
        return self._out.get(d, [])

    def predecessors(self, d: str) -> list[str]:
        return self._in.get(d, [])

    def link(self, a: str, b: str) -> Link | None:
        return self.links.get((a, b))

    def link_ids(self) -> list[str]:
        return sorted({l.id for l in self.links.values()})

    def links_with_id(self, link_id: str) -> list[Link]:
        return [l for l in self.links.values() if l.id == link_id]

    def devices_with_label(self, label: str) -> frozenset[str]:
        return frozenset(d for d, ls in self.labels.items() if label in ls)


class LinkStateMap:
    """Immutable up/down state per link id; unknown ids are up."""

    def __init__(self, down: Iterable[str] = ()):
        self.down = frozenset(down)

    def is_up(self, link_id: str) -> bool:
        return link_id not in self.down

    def link_up(self, topo: Topology, a: str, b: str) -> bool:
        link = topo.link(a, b)
        return link is not None and self.is_up(link.id)

    def with_state(self, link_id: str, up: bool) -> "LinkStateMap":
        return LinkStateMap(self.down - {link_id} if up else self.down | {link_id})

    def __eq__(self, other):
        return isinstance(other, LinkStateMap) and self.down == other.down

    def __hash__(self):
        return hash(self.down)


@dataclass(frozen=True)
class NextHop:
    dev: str
    rewrite: HeaderRewrite | None = None

    def to_json(self):
        if self.rewrite is None or self.rewrite.is_identity:
            return {"dev": self.dev}
        return {"dev": self.dev, "rewrite": str(self.rewrite)}


@dataclass(frozen=True)
class NextHopGroup:
    mode: str = ANY
    members: tuple[NextHop, ...] = ()

    def __post_init__(self):
        if self.mode not in (ANY, ALL):
            raise ConfigurationError(f"group mode must be ANY or ALL, got {self.mode!r}")

    @classmethod
    def drop(cls) -> "NextHopGroup":
        return cls(ANY, ())

    @classmethod
    def of(cls, *devs: str, mode: str = ANY) -> "NextHopGroup":
        return cls(mode, tuple(NextHop(d) for d in devs))

    @property
    def is_drop(self) -> bool:
        return not self.members

    @property
    def devices(self) -> tuple[str, ...]:
        return tuple(m.dev for m in self.members)

    def __str__(self):
        return f"{self.mode}{{{','.join(self.devices)}}}"


@dataclass(frozen=True)
class Condition:
    """Backup rule guard: use ``primary`` while its link is up, else ``backup``."""

    primary: str
    backup: str


@dataclass(frozen=True)
class FibEntry:
    match: HeaderSpace
    group: NextHopGroup = field(default_factory=NextHopGroup.drop)
    condition: Condition | None = None

    def same_action(self, other: "FibEntry") -> bool:
        return self.group == other.group and self.condition == other.condition


@dataclass(frozen=True)
class Fib:
    owner: str
    cp: str
    width: int
    entries: tuple[FibEntry, ...] = ()

    def lookup(self, space: HeaderSpace) -> list[tuple[HeaderSpace, NextHopGroup]]:
        """Partition ``space`` by matching entry; unmatched packets get a drop group."""
        out = []
        rest = space
        for e in self.entries:
            sub = rest & e.match
            if sub:
                out.append((sub, e.group))
                rest = rest - sub
        if rest:
            out.append((rest, NextHopGroup.drop()))
        return out

    def lookup_entries(self, space: HeaderSpace) -> list[tuple[HeaderSpace, FibEntry | None]]:
        out = []
        rest = space
        for e in self.entries:
            sub = rest & e.match
            if sub:
                out.append((sub, e))
                rest = rest - sub
        if rest:
            out.append((rest, None))
        return out

    def matched_space(self) -> HeaderSpace:
        acc = HeaderSpace.empty(self.width)
        for e in self.entries:
            acc = acc | e.match
        return acc

    def find(self, match: HeaderSpace) -> int | None:
        for i, e in enumerate(self.entries):
            if e.match == match:
                return i
        return None


def overlaps(fib: Fib) -> list[tuple[int, int, HeaderSpace]]:
    found = []
    for i, a in enumerate(fib.entries):
        for j in range(i + 1, len(fib.entries)):
            w = a.match & fib.entries[j].match
            if w:
                found.append((i, j, w))
    return found


def validate(fib: Fib) -> bool:
    """Return True for a FIB with pairwise disjoint matches, else raise."""
    found = overlaps(fib)
    if found:
        desc = "; ".join(f"entries {i} and {j} overlap on {w}" for i, j, w in found)
        raise ValidationError(f"FIB {fib.owner}/{fib.cp}: {desc}", found)
    return True


INSERT, MODIFY, DELETE = "insert", "modify", "delete"


def apply_fib_update(fib: Fib, op: str, entry: FibEntry) -> tuple[Fib, HeaderSpace]:
    """Apply one update; return the new FIB and the space whose behavior may differ.

    ``modify`` and ``delete`` address the existing entry whose match equals
    ``entry.match``.  An update that would break disjointness is rejected and
    the original FIB is left untouched.
    """
    entries = list(fib.entries)
    if op == INSERT:
        entries.append(entry)
        changed = entry.match
    elif op in (MODIFY, DELETE):
        idx = fib.find(entry.match)
        if idx is None:
            raise ConfigurationError(f"no entry matching {entry.match} at {fib.owner}/{fib.cp}")
        old = entries[idx]
        if op == DELETE:
            del entries[idx]
            changed = old.match
        else:
            entries[idx] = entry
            changed = HeaderSpace.empty(fib.width) if old.same_action(entry) else old.match | entry.match
    else:
        raise ConfigurationError(f"unknown FIB operation {op!r}")
    new = replace(fib, entries=tuple(entries))
    validate(new)
    return new, changed


# --- file formats -------------------------------------------------------


def parse_group(data: dict, layout: FieldLayout) -> tuple[NextHopGroup, Condition | None]:
    mode = str(data.get("mode", ANY)).upper()
    members = []
    for nh in data.get("nexthops", []):
        if isinstance(nh, str):
            members.append(NextHop(nh))
        else:
            rw = HeaderRewrite.parse(nh["rewrite"]) if nh.get("rewrite") else None
            if rw is not None and rw.width != layout.width:
                raise ConfigurationError(f"rewrite {nh['rewrite']!r} does not have width {layout.width}")
            members.append(NextHop(nh["dev"], rw))
    cond = data.get("condition")
    condition = Condition(cond["primary"], cond["backup"]) if cond else None
    return NextHopGroup(mode, tuple(members)), condition


def parse_entry(data: dict, layout: FieldLayout) -> FibEntry:
    match = HeaderSpace.parse(data["match"], layout.width, layout)
    group, condition = parse_group(data, layout)
    return FibEntry(match, group, condition)


def entry_to_json(e: FibEntry) -> dict:
    out = {"match": str(e.match), "mode": e.group.mode, "nexthops": [m.to_json() for m in e.group.members]}
    if e.condition:
        out["condition"] = {"primary": e.condition.primary, "backup": e.condition.backup}
    return out


Vfibs = dict  # cp -> device -> Fib


def load_fibs(data: dict, topo: Topology) -> Vfibs:
    """``{device: {cp: [entry, ...]}}`` to ``{cp: {device: Fib}}``; missing FIBs are empty."""
    out: dict[str, dict[str, Fib]] = {}
    for dev, per_cp in data.items():
        if not topo.has_device(dev):
            raise ConfigurationError(f"FIB for undeclared device {dev!r}")
        for cp, entries in per_cp.items():
            fib = Fib(dev, cp, topo.width, tuple(parse_entry(e, topo.layout) for e in entries))
            validate(fib)
            out.setdefault(cp, {})[dev] = fib
    for cp, fibs in out.items():
        for dev in topo.devices:
            fibs.setdefault(dev, Fib(dev, cp, topo.width))
    return out


def empty_fibs(topo: Topology, cp: str) -> dict[str, Fib]:
    return {d: Fib(d, cp, topo.width) for d in topo.devices}


def fibs_to_json(vfibs: Vfibs) -> dict:
    out: dict = {}
    for cp, fibs in sorted(vfibs.items()):
        for dev, fib in sorted(fibs.items()):
            if fib.entries:
                out.setdefault(dev, {})[cp] = [entry_to_json(e) for e in fib.entries]
    return out


EVENT_KINDS = ("link_down", "link_up", "fib_insert", "fib_delete", "fib_modify", "fib_replace")


@dataclass(frozen=True)
class ScriptEvent:
    t: int
    kind: str
    device: str | None = None
    cp: str | None = None
    entry: FibEntry | None = None
    link_id: str | None = None
    old_match: HeaderSpace | None = None  # fib_replace only


def parse_event(data: dict, topo: Topology, default_cp: str | None = None) -> ScriptEvent:
    kind = data["kind"]
    if kind not in EVENT_KINDS:
        raise ConfigurationError(f"unknown script event kind {kind!r}")
    t = int(data.get("t", 0))
    if kind.startswith("link_"):
        if "link" in data:
            lid = data["link"]
        else:
            link = topo.link(data["from"], data["to"])
            if link is None:
                raise ConfigurationError(f"no link {data['from']}->{data['to']}")
            lid = link.id
        if not topo.links_with_id(lid):
            raise ConfigurationError(f"unknown link id {lid!r}")
        return ScriptEvent(t, kind, link_id=lid)
    dev = data["device"]
    if not topo.has_device(dev):
        raise ConfigurationError(f"event for undeclared device {dev!r}")
    cp = data.get("cp", default_cp)
    old = None
    if kind == "fib_replace":
        if "old_match" not in data:
            raise ConfigurationError("fib_replace needs old_match")
        old = HeaderSpace.parse(data["old_match"], topo.width, topo.layout)
    return ScriptEvent(t, kind, device=dev, cp=cp, entry=parse_entry(data, topo.layout), old_match=old)


def apply_event(event: ScriptEvent, vfibs: Vfibs, links: LinkStateMap, topo: Topology):
    """Apply a script event to FIB/link snapshots.

    Returns ``(vfibs, links, changed_space)``; ``changed_space`` is None for
    link events.
    """
    if event.kind == "link_down":
        return vfibs, links.with_state(event.link_id, False), None
    if event.kind == "link_up":
        return vfibs, links.with_state(event.link_id, True), None
    cp_fibs = vfibs.setdefault(event.cp, empty_fibs(topo, event.cp))
    old = cp_fibs.get(event.device, Fib(event.device, event.cp, topo.width))
    if event.kind == "fib_replace":
        mid, c1 = apply_fib_update(old, DELETE, FibEntry(event.old_match))
        new, c2 = apply_fib_update(mid, INSERT, event.entry)
        changed = c1 | c2
    else:
        op = {"fib_insert": INSERT, "fib_delete": DELETE, "fib_modify": MODIFY}[event.kind]
        new, changed = apply_fib_update(old, op, event.entry)
    vfibs = {k: dict(v) for k, v in vfibs.items()}
    vfibs[event.cp][event.device] = new
    return vfibs, links, changed
