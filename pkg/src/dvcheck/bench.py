"""Message-traffic sweeps over generated topologies.

Each sweep returns a list of flat dict rows; :func:`run_bench` writes every
table as CSV and renders one figure per table next to it.
"""

from __future__ import annotations

import csv
import io
import random
from pathlib import Path

from . import topogen
from .datamodel import Fib, FibEntry, LinkStateMap, NextHopGroup
from .dvp import DvProtocol
from .hsa import HeaderSpace


def _drop(fib: Fib) -> Fib:
    return Fib(fib.owner, fib.cp, fib.width)


def sweep_line(ns=(4, 8, 16, 32)) -> list[dict]:
    """Break one hop at a time on a chain; count messages until quiescence."""
    rows = []
    for n in ns:
        g = topogen.line(n)
        proto = DvProtocol(g.net, g.topo, g.fibs)
        proto.initialize()
        links = len(g.topo.links)
        for i, dev in enumerate(g.topo.devices):
            if dev == g.dest:
                continue
            msgs = proto.update_fib(dev, _drop(g.fibs[dev]))
            rows.append({"n": n, "node": dev, "distance": i, "messages": msgs, "links": links})
            proto.update_fib(dev, g.fibs[dev])
    return rows


def sweep_grid(ns=(3, 5, 8), seed: int = 0) -> list[dict]:
    """Flip every interior node between right and down, one after another."""
    rows = []
    for n in ns:
        g = topogen.grid(n, seed)
        proto = DvProtocol(g.net, g.topo, g.fibs)
        proto.initialize()
        for i, j in topogen.interior(n):
            dev = topogen.grid_name(i, j)
            cur = proto.fibs[dev].entries[0].group.devices[0]
            right, down = topogen.grid_name(i, j + 1), topogen.grid_name(i + 1, j)
            new = down if cur == right else right
            fib = Fib(dev, "gen", g.topo.width, (FibEntry(HeaderSpace.full(g.topo.width), NextHopGroup.of(new)),))
            msgs = proto.update_fib(dev, fib)
            rows.append({"n": n, "node": dev, "from": cur, "to": new, "messages": msgs})
    return rows


def sweep_fat_tree(ks=(4, 8), seed: int = 0, events: int = 12) -> list[dict]:
    """Fail and restore DAG links one at a time on a shortest-path DAG."""
    rows = []
    for k in ks:
        g = topogen.fat_tree(k)
        proto = DvProtocol(g.net, g.topo, g.fibs)
        init = proto.initialize()
        rng = random.Random(seed + k)
        dag_links = sorted({g.topo.link(a.device, b.device).id for a in g.net.nodes for b in g.net.successors(a)})
        picked = rng.sample(dag_links, min(events, len(dag_links)))
        rows.append({"k": k, "dv_nodes": len(g.net.nodes), "event": "init", "link": "",
                     "messages": init.messages_total, "bytes": init.bytes_total})
        for lid in picked:
            before = proto.sim.metrics.bytes_total
            m = proto.update_links(LinkStateMap([lid]))
            rows.append({"k": k, "dv_nodes": len(g.net.nodes), "event": "link_down", "link": lid,
                         "messages": m, "bytes": proto.sim.metrics.bytes_total - before})
            before = proto.sim.metrics.bytes_total
            m = proto.update_links(LinkStateMap())
            rows.append({"k": k, "dv_nodes": len(g.net.nodes), "event": "link_up", "link": lid,
                         "messages": m, "bytes": proto.sim.metrics.bytes_total - before})
    return rows


def sweep_random_dags(ns=(8, 16, 32), seeds=(0, 1, 2)) -> list[dict]:
    """Initial wave and one breaking update per node on random DAGs."""
    rows = []
    for n in ns:
        for s in seeds:
            g = topogen.random_dag(n, s)
            if g.net.is_empty:
                continue
            proto = DvProtocol(g.net, g.topo, g.fibs)
            init = proto.initialize()
            breaks = []
            for dev in sorted({x.device for x in g.net.nodes} - {g.dest}):
                breaks.append(proto.update_fib(dev, _drop(g.fibs[dev])))
                proto.update_fib(dev, g.fibs[dev])
            rows.append({"n": n, "seed": s, "dv_nodes": len(g.net.nodes), "init_messages": init.messages_total,
                         "mean_break_messages": round(sum(breaks) / len(breaks), 4) if breaks else 0,
                         "max_break_messages": max(breaks) if breaks else 0})
    return rows


def to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def run_bench(out: str | Path | None = None, seed: int = 0, quick: bool = False, plots: bool = True) -> dict:
    tables = {
        "line": sweep_line((4, 8) if quick else (4, 8, 16, 32)),
        "grid": sweep_grid((3, 5) if quick else (3, 5, 8), seed),
        "fat_tree": sweep_fat_tree((4,) if quick else (4, 8), seed, 4 if quick else 12),
        "random_dag": sweep_random_dags((8,) if quick else (8, 16, 32), (seed,) if quick else (seed, seed + 1, seed + 2)),
    }
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for name, rows in tables.items():
            (out / f"{name}.csv").write_text(to_csv(rows))
        if plots:
            from . import plotting

            plotting.render_all(tables, out)
    return tables
