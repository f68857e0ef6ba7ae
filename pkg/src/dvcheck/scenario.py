"""Scenario files and the end-to-end verification pipeline.

A scenario is one JSON document; any of ``topology``, ``fibs``, ``program``
and ``script`` may instead be a path relative to the scenario file::

    {
      "topology": {...}, "fibs": {...},
      "program": "reach = (dstIp = 10.0.2.0/24) -> [S].*[D]",
      "cp": "ospf", "script": [{"t": 1, "kind": "link_down", "link": "W-D"}],
      "seed": 0, "delivery_mode": "fifo",
      "options": {"anycast": "permissive", "coverage": false}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import automata, dvnet
from . import reqlang as rl
from .datamodel import Fib, LinkStateMap, ScriptEvent, Topology, Vfibs, apply_event, load_fibs, parse_event
from .dvp import DvProtocol, Options
from .errors import ConfigurationError
from .hsa import HeaderSpace
from .sim import FIFO, Metrics


@dataclass
class Scenario:
    topo: Topology
    vfibs: Vfibs
    program: rl.Program
    script: list[ScriptEvent] = field(default_factory=list)
    seed: int = 0
    delivery: str = FIFO
    options: Options = field(default_factory=Options)
    links: LinkStateMap = field(default_factory=LinkStateMap)
    cp: str | None = None
    ingresses: list[str] = field(default_factory=list)
    frr: list[dict] = field(default_factory=list)
    damping: dict = field(default_factory=dict)
    delegated: list[str] = field(default_factory=list)
    raw: dict = field(default_factory=dict)

    @property
    def cps(self) -> list[str]:
        return sorted(self.vfibs)

    def default_cp(self) -> str:
        if self.cp:
            return self.cp
        if len(self.vfibs) == 1:
            return next(iter(self.vfibs))
        if not self.vfibs:
            return "default"
        raise ConfigurationError(f"scenario has several CPs {self.cps}; set \"cp\"")

    def fibs_for(self, cp: str) -> dict[str, Fib]:
        fibs = self.vfibs.get(cp)
        if fibs is None:
            return {d: Fib(d, cp, self.topo.width) for d in self.topo.devices}
        return fibs


def _load_part(value, base: Path, text: bool = False):
    if isinstance(value, str) and not text:
        return json.loads((base / value).read_text())
    if isinstance(value, str) and text:
        p = base / value
        if "\n" not in value and len(value) < 256 and p.suffix in (".req", ".txt", ".rl") and p.exists():
            return p.read_text()
    return value


def load_scenario(source, base_dir: str | Path | None = None) -> Scenario:
    """Load a scenario from a path or an already-parsed dict."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"scenario file {path} not found") from None
        base = Path(base_dir) if base_dir else path.parent
    else:
        data = source
        base = Path(base_dir) if base_dir else Path.cwd()
    if "topology" not in data:
        raise ConfigurationError("scenario needs a topology")
    topo = Topology.from_json(_load_part(data["topology"], base))
    vfibs = load_fibs(_load_part(data.get("fibs", {}), base), topo)
    text = _load_part(data.get("program", ""), base, text=True)
    if isinstance(text, list):
        text = "\n".join(text)
    program = rl.parse_program(text, topo.layout) if text else rl.Program()
    cp = data.get("cp")
    script_data = _load_part(data.get("script", []), base)
    script = [parse_event(e, topo, cp or (next(iter(vfibs)) if len(vfibs) == 1 else None)) for e in script_data]
    script.sort(key=lambda e: e.t)
    opts = Options(**data.get("options", {}))
    links = LinkStateMap(data.get("links_down", ()))
    return Scenario(
        topo, vfibs, program, script,
        seed=int(data.get("seed", 0)),
        delivery=data.get("delivery_mode", FIFO),
        options=opts, links=links, cp=cp,
        ingresses=list(data.get("ingresses", [])),
        frr=list(data.get("frr", [])),
        damping=dict(data.get("damping", {})),
        delegated=list(data.get("delegated", [])),
        raw=data,
    )


def default_sources(topo: Topology, auto) -> list[str]:
    """Devices at which some accepted path may start."""
    return [d for d in topo.devices if not auto.is_dead(auto.step(auto.initial, d))]


def build_network(topo: Topology, req: rl.Requirement, source: str, budget: int = dvnet.DEFAULT_NODE_BUDGET):
    auto = automata.lazy_automaton(req.paths, topo, budget)
    return dvnet.build_product(topo, auto, source, budget)


def requirement_sources(topo: Topology, req: rl.Requirement) -> list[str]:
    auto = automata.lazy_automaton(req.paths, topo)
    if req.sources is not None:
        return automata.resolve_sources(req.sources, topo)
    return default_sources(topo, automata.NumberedAutomaton(auto) if not isinstance(auto, automata.PathDfa) else auto)


@dataclass
class SourceResult:
    source: str
    verified: HeaderSpace
    violating: HeaderSpace

    def to_json(self) -> dict:
        return {"source": self.source, "verified": self.verified.to_strings(),
                "violating": self.violating.to_strings()}


@dataclass
class VerifyRun:
    """One requirement under one CP, with a DV protocol instance per source."""

    requirement: str
    cp: str
    query: HeaderSpace
    protocols: dict  # source -> DvProtocol
    steps: list = field(default_factory=list)  # per step: [SourceResult]

    def results(self) -> list[SourceResult]:
        out = []
        for src, proto in sorted(self.protocols.items()):
            ok, bad = proto.verdict(self.query)
            out.append(SourceResult(src, ok, bad))
        return out

    def metrics(self) -> Metrics:
        total = Metrics()
        for _, proto in sorted(self.protocols.items()):
            m = proto.metrics
            total.messages_total += m.messages_total
            total.bytes_total += m.bytes_total
            total.convergence_ticks = max(total.convergence_ticks, m.convergence_ticks)
            for k, v in m.per_node_record_bytes.items():
                total.per_node_record_bytes[f"{proto.net.root.device if proto.net.root else '-'}:{k}"] = v
            if not total.per_event_messages:
                total.per_event_messages = [0] * len(m.per_event_messages)
                total.per_event_ticks = [0] * len(m.per_event_ticks)
            for i, v in enumerate(m.per_event_messages):
                total.per_event_messages[i] += v
                total.per_event_ticks[i] = max(total.per_event_ticks[i], m.per_event_ticks[i])
        return total

    def init_messages(self) -> int:
        return sum(p.init_metrics.messages_total for p in self.protocols.values() if p.init_metrics)


def start_run(sc: Scenario, req_name: str | None = None, cp: str | None = None,
              delivery: str | None = None, seed: int | None = None, executor: str = "serial",
              vfibs: Vfibs | None = None, links: LinkStateMap | None = None) -> VerifyRun:
    req = sc.program.requirement(req_name)
    cp = cp or sc.default_cp()
    fibs = (vfibs or sc.vfibs).get(cp) or sc.fibs_for(cp)
    query = rl.eval_space(req.space, sc.topo.layout)
    protocols = {}
    for src in requirement_sources(sc.topo, req):
        net = build_network(sc.topo, req, src)
        proto = DvProtocol(net, sc.topo, fibs, links or sc.links, sc.options,
                           delivery=delivery or sc.delivery, seed=sc.seed if seed is None else seed,
                           executor=executor)
        proto.initialize()
        protocols[src] = proto
    run = VerifyRun(req.name, cp, query, protocols)
    run.steps.append(run.results())
    return run


def advance(run: VerifyRun, event: ScriptEvent, vfibs: Vfibs, links: LinkStateMap, topo: Topology):
    """Apply one script event to snapshots and to every protocol instance."""
    vfibs, links, _changed = apply_event(event, vfibs, links, topo)
    for proto in run.protocols.values():
        if event.kind.startswith("link_"):
            proto.update_links(links)
        elif event.cp == run.cp:
            proto.update_fib(event.device, vfibs[event.cp][event.device])
        else:
            proto.sim.begin_event()
            proto.sim.end_event()
    run.steps.append(run.results())
    return vfibs, links


def run(sc: Scenario, req_name: str | None = None, cp: str | None = None, **kw) -> tuple[VerifyRun, Metrics]:
    """Execute the whole script to quiescence after each event."""
    vr = start_run(sc, req_name, cp, **kw)
    vfibs, links = sc.vfibs, sc.links
    for ev in sc.script:
        vfibs, links = advance(vr, ev, vfibs, links, sc.topo)
    return vr, vr.metrics()
