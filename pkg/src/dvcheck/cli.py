"""Command line: ``dvcheck verify|compose|fsd|bench``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as benchmod
from . import reqlang as rl
from .composer import CROSS_CP, Composer, DampingState, VerificationResult, emit_tables, register_frr
from .errors import (BudgetExceeded, ConfigurationError, ContractViolation, DivergenceError,
                     NotConvertibleError, ProtocolError, ReqLangSyntaxError, ValidationError)
from .fsd import FsdNetwork
from .datamodel import apply_event, parse_event
from .hsa import HeaderSpace
from .scenario import Scenario, advance, load_scenario, start_run

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERTIBLE, EXIT_PROTOCOL = 0, 2, 3, 4


def _event_label(ev) -> str:
    if ev.kind.startswith("link_"):
        return f"t={ev.t} {ev.kind} {ev.link_id}"
    return f"t={ev.t} {ev.kind} {ev.device}/{ev.cp} {ev.entry.match}"


# --- verify -------------------------------------------------------------------


def cmd_verify(sc: Scenario, args) -> dict:
    run = start_run(sc, args.requirement, args.cp, delivery=args.delivery, seed=args.seed,
                    executor=args.executor)
    steps = [{"event": "initial", "results": [r.to_json() for r in run.steps[-1]]}]
    vfibs, links = sc.vfibs, sc.links
    for ev in sc.script:
        vfibs, links = advance(run, ev, vfibs, links, sc.topo)
        steps.append({"event": _event_label(ev), "results": [r.to_json() for r in run.steps[-1]]})
    report = {
        "command": "verify",
        "requirement": run.requirement,
        "cp": run.cp,
        "query": run.query.to_strings(),
        "steps": steps,
        "metrics": run.metrics().to_json(),
        "init_messages": run.init_messages(),
    }
    if args.dump_dag:
        report["dag"] = {src: p.net.to_json() for src, p in sorted(run.protocols.items())}
    return report


def _print_verify(report: dict):
    print(f"requirement {report['requirement']} on cp {report['cp']}; query {', '.join(report['query']) or '∅'}")
    for step in report["steps"]:
        print(f"== {step['event']}")
        for r in step["results"]:
            ok = ",".join(r["verified"]) or "∅"
            bad = ",".join(r["violating"]) or "∅"
            print(f"  source {r['source']}: verified {ok} | violating {bad}")
    m = report["metrics"]
    print(f"messages {m['messages_total']}  bytes {m['bytes_total']}  ticks {m['convergence_ticks']}"
          f"  per-event {m['per_event_messages']}")
    if "dag" in report:
        for src, dag in report["dag"].items():
            print(f"dag from {src}: {len(dag['nodes'])} nodes, sinks {dag['sinks']}")
            for a, b in dag["edges"]:
                print(f"  {a} -> {b}")


# --- compose --------------------------------------------------------------------


def _verified_at(run, source: str, width: int) -> HeaderSpace:
    for r in run.results():
        if r.source == source:
            return r.verified
    return HeaderSpace.empty(width)


def cmd_compose(sc: Scenario, args) -> dict:
    if not sc.program.cpspecs:
        raise ConfigurationError("compose needs a cpspec in the scenario program")
    spec: rl.CpSpec = sc.program.cpspecs[-1]
    width = sc.topo.width
    space = rl.eval_space(spec.space, sc.topo.layout)
    ranked = [cp for _, cp in spec.ranked]
    req_of = {cp: req for req, cp in spec.ranked}
    runs = {cp: start_run(sc, req_of[cp], cp, delivery=args.delivery, seed=args.seed) for cp in ranked}
    ingresses = sc.ingresses or sorted({s for r in runs.values() for s in r.protocols})
    comp = Composer(space, ranked, ingresses, DampingState(**sc.damping))
    leader = comp.leader
    vfibs = {cp: dict(sc.fibs_for(cp)) for cp in sc.vfibs}
    virtual = []
    for spec_frr in sc.frr:
        base = spec_frr["base"]
        kind = spec_frr["kind"]
        params = dict(spec_frr.get("params", {}))
        if kind == CROSS_CP and "other" in spec_frr:
            params["other"] = spec_frr["other"]
        vcp = register_frr(base, kind, params, sc.topo, vfibs, spec_frr.get("id"))
        vfibs[vcp.id] = vcp.vfibs
        vrun = start_run(sc, req_of[base], base, delivery=args.delivery, seed=args.seed,
                         vfibs={base: vcp.vfibs})
        runs[vcp.id] = vrun
        virtual.append(vcp)
        comp.add_virtual(vcp, _verified_at(vrun, leader, width) & space)
    results = VerificationResult()
    for cp, run in runs.items():
        for r in run.results():
            results.set(cp, r.source, r.verified)
    comp.start({cp: results.get(cp, leader, width) for cp in ranked})
    steps = [{"event": "initial", "failover": None, "assignment": comp.assignment.to_json(),
              "damping": comp.damping.to_json()}]
    links = sc.links
    cur = {cp: dict(fibs) for cp, fibs in sc.vfibs.items()}
    for ev in sc.script:
        failover = None
        if ev.kind == "link_down":
            for cp in ranked:
                if comp.virtual.get(cp):
                    failover = comp.on_link_failure(cp, ev.t).to_json()
        new_cur, new_links, _ = apply_event(ev, cur, links, sc.topo)
        for cp in ranked:
            advance(runs[cp], ev, cur, links, sc.topo)
        for v in virtual:
            # virtual CPs hold pre-verified static state; only link events reach them
            if ev.kind.startswith("link_"):
                advance(runs[v.id], ev, {v.base: vfibs[v.id]}, links, sc.topo)
            comp.verified[v.id] = _verified_at(runs[v.id], leader, width) & space
        cur, links = new_cur, new_links
        comp.poll(ev.t)
        decisions = {}
        for cp in ranked:
            d = comp.on_result(cp, _verified_at(runs[cp], leader, width), ev.t)
            if d:
                decisions[cp] = d
        steps.append({"event": _event_label(ev), "failover": failover, "decisions": decisions,
                      "assignment": comp.assignment.to_json(), "damping": comp.damping.to_json()})
    adopted = comp.adopt()
    tables = {}
    for dev in sc.topo.devices:
        dev_fibs = {cp: cur[cp][dev] for cp in cur if dev in cur[cp]}
        for v in virtual:
            dev_fibs[v.id] = vfibs[v.id][dev]
        tables[dev] = emit_tables(comp.assignment, dev_fibs, dev, width).to_json()
    return {
        "command": "compose",
        "cpspec": spec.name,
        "ranked": ranked,
        "leader": leader,
        "ingresses": ingresses,
        "virtual_cps": [{"id": v.id, "kind": v.kind, "base": v.base,
                         "delta": {d: [str(e.match) + " -> " + str(e.group) for e in es]
                                   for d, es in sorted(v.delta.items())}} for v in virtual],
        "steps": steps,
        "adopted": {i: a.to_json() for i, a in adopted.items()},
        "report": comp.report(),
        "tables": tables,
    }


def _print_compose(report: dict):
    print(f"cpspec {report['cpspec']}: ranking {' > '.join(report['ranked'])}; leader {report['leader']}")
    for v in report["virtual_cps"]:
        print(f"virtual cp {v['id']} ({v['kind']} of {v['base']})")
        for d, es in v["delta"].items():
            for e in es:
                print(f"  {d}: {e}")
    for step in report["steps"]:
        print(f"== {step['event']}")
        if step.get("failover"):
            print("  failover: " + "; ".join(f"{','.join(p['space'])} -> {p['cp']}" for p in step["failover"]))
        print("  assignment: " + "; ".join(f"{','.join(p['space'])} -> {p['cp']}" for p in step["assignment"]))
        d = step["damping"]
        print(f"  damping penalty {d['penalty']:.3f} suppressed {d['suppressed']}")
    print("selection tables:")
    for dev, t in report["tables"].items():
        rows = "; ".join(f"{','.join(r['space'])} -> {r['table']}" for r in t["selection"])
        print(f"  {dev}: {rows}")


# --- fsd -------------------------------------------------------------------------


def cmd_fsd(sc: Scenario, args) -> dict:
    cp = args.cp or sc.default_cp()
    script = sc.script
    if args.script:
        data = json.loads(Path(args.script).read_text())
        script = sorted((parse_event(e, sc.topo, cp) for e in data), key=lambda e: e.t)
    fsd = FsdNetwork(sc.topo, sc.fibs_for(cp), sc.links, delivery=args.delivery or sc.delivery,
                     seed=sc.seed if args.seed is None else args.seed).initialize()
    steps = [{"event": "initial", "broadcasts": 0, "tables": fsd.dump()}]
    for ev in script:
        if not ev.kind.startswith("link_") and ev.cp != cp:
            continue
        start = len(fsd.broadcasts)
        fsd.apply(ev)
        sent = [{"origin": o, "space": s.to_strings(), "path": str(p)} for o, s, p in fsd.broadcasts[start:]]
        steps.append({"event": _event_label(ev), "broadcasts": len(sent), "updates": sent, "tables": fsd.dump()})
    return {"command": "fsd", "cp": cp, "steps": steps, "metrics": fsd.sim.metrics.to_json(),
            "loops": {d: s.to_strings() for d, s in sorted(fsd.loops.items())}}


def _print_fsd(report: dict, dump: bool):
    for step in report["steps"]:
        print(f"== {step['event']}  ({step['broadcasts']} path updates)")
        for u in step.get("updates", []):
            print(f"  update ({u['origin']}, {','.join(u['space'])}, {u['path']})")
        if dump or step["event"] == "initial" or step is report["steps"][-1]:
            for dev, entries in step["tables"].items():
                print(f"  {dev}: " + "; ".join(f"{','.join(e['space'])} {e['path']}" for e in entries))
    m = report["metrics"]
    print(f"messages {m['messages_total']}  bytes {m['bytes_total']}")


# --- bench -------------------------------------------------------------------------


def cmd_bench(args) -> dict:
    tables = benchmod.run_bench(args.out, args.seed or 0, args.quick, plots=args.out is not None)
    return {"command": "bench", "tables": tables}


def _print_bench(report: dict, out):
    for name, rows in report["tables"].items():
        print(f"# {name}")
        print(benchmod.to_csv(rows), end="")
    if out:
        print(f"# wrote CSV and PNG files to {out}")


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dvcheck", description="Distributed data-plane verification toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--delivery", choices=["fifo", "reorder"], default=None)
        sp.add_argument("--json", action="store_true", help="emit the report as JSON")

    v = sub.add_parser("verify", help="run the DV protocol over a scenario script")
    common(v)
    v.add_argument("--requirement", default=None, help="requirement name (default: last defined)")
    v.add_argument("--cp", default=None)
    v.add_argument("--dump-dag", action="store_true")
    v.add_argument("--executor", choices=["serial", "threads"], default="serial")

    c = sub.add_parser("compose", help="verify every ranked CP and compose them")
    common(c)

    f = sub.add_parser("fsd", help="run FIB-state distribution over a scenario script")
    common(f)
    f.add_argument("--cp", default=None)
    f.add_argument("--script", default=None, help="event script JSON overriding the scenario's")
    f.add_argument("--dump-lec", "--dump", dest="dump_lec", action="store_true", help="print tables after every event")

    b = sub.add_parser("bench", help="message-traffic sweeps over generated topologies")
    common(b, scenario=False)
    b.add_argument("--out", default=None, help="directory for CSV tables and PNG figures")
    b.add_argument("--quick", action="store_true", help="smaller sweep")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bench":
            report = cmd_bench(args)
        else:
            sc = load_scenario(args.scenario)
            report = {"verify": cmd_verify, "compose": cmd_compose, "fsd": cmd_fsd}[args.command](sc, args)
    except NotConvertibleError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERTIBLE
    except (DivergenceError, ProtocolError, ContractViolation) as e:
        print(f"protocol error: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (ConfigurationError, ValidationError, ReqLangSyntaxError, BudgetExceeded, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False))
    elif args.command == "verify":
        _print_verify(report)
    elif args.command == "compose":
        _print_compose(report)
    elif args.command == "fsd":
        _print_fsd(report, args.dump_lec)
    else:
        _print_bench(report, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
