"""Synthetic topologies with ready-made FIBs for benchmarks and tests."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .datamodel import ANY, Fib, FibEntry, NextHopGroup, Topology
from .dvnet import DvNetwork, build_product, build_shortest_path, hop_distances
from .automata import lazy_automaton
from .hsa import HeaderSpace
from . import reqlang as rl


@dataclass
class Generated:
    name: str
    topo: Topology
    fibs: dict
    net: DvNetwork
    source: str
    dest: str


def _fib(dev: str, width: int, nexthops, mode: str = ANY) -> Fib:
    if not nexthops:
        return Fib(dev, "gen", width)
    return Fib(dev, "gen", width, (FibEntry(HeaderSpace.full(width), NextHopGroup.of(*nexthops, mode=mode)),))


def _reach_net(topo: Topology, src: str, dst: str) -> DvNetwork:
    req = rl.parse_requirement(f"(all) -> [{src}].*[{dst}]")
    return build_product(topo, lazy_automaton(req.paths, topo), src)


def line(n: int, width: int = 8) -> Generated:
    """Directed chain n0 -> n1 -> ... with every hop forwarding everything onward."""
    names = [f"n{i:02d}" for i in range(n)]
    topo = Topology.build(names, list(zip(names, names[1:])), directed=True, width=width)
    fibs = {d: _fib(d, width, [names[i + 1]] if i + 1 < n else []) for i, d in enumerate(names)}
    return Generated(f"line-{n}", topo, fibs, _reach_net(topo, names[0], names[-1]), names[0], names[-1])


def grid_name(i: int, j: int) -> str:
    return f"g{i}_{j}"


def grid(n: int, seed: int = 0, width: int = 8) -> Generated:
    """n x n grid where every node may only go right or down; next hops are random."""
    rng = random.Random(seed)
    names = [grid_name(i, j) for i in range(n) for j in range(n)]
    edges = []
    for i in range(n):
        for j in range(n):
            if j + 1 < n:
                edges.append((grid_name(i, j), grid_name(i, j + 1)))
            if i + 1 < n:
                edges.append((grid_name(i, j), grid_name(i + 1, j)))
    topo = Topology.build(names, edges, directed=True, width=width)
    fibs = {}
    for i in range(n):
        for j in range(n):
            opts = topo.successors(grid_name(i, j))
            fibs[grid_name(i, j)] = _fib(grid_name(i, j), width, [rng.choice(opts)] if opts else [])
    src, dst = grid_name(0, 0), grid_name(n - 1, n - 1)
    return Generated(f"grid-{n}", topo, fibs, _reach_net(topo, src, dst), src, dst)


def interior(n: int) -> list[tuple[int, int]]:
    """Grid cells that have both a right and a down neighbour."""
    return [(i, j) for i in range(n - 1) for j in range(n - 1)]


def fat_tree(k: int, width: int = 8) -> Generated:
    """k-ary fat-tree; shortest-path DAG from the first edge switch to the last,
    every switch spreading over all its shortest next hops (ANY)."""
    if k % 2:
        raise ValueError("fat-tree arity must be even")
    half = k // 2
    core = [f"c{i}_{j}" for i in range(half) for j in range(half)]
    agg = {p: [f"a{p}_{i}" for i in range(half)] for p in range(k)}
    edge = {p: [f"e{p}_{i}" for i in range(half)] for p in range(k)}
    links = []
    for p in range(k):
        for a in agg[p]:
            for e in edge[p]:
                links.append((a, e))
        for i, a in enumerate(agg[p]):
            for j in range(half):
                links.append((a, f"c{i}_{j}"))
    names = core + [x for p in range(k) for x in agg[p] + edge[p]]
    topo = Topology.build(names, links, width=width)
    src, dst = edge[0][0], edge[k - 1][half - 1]
    net = build_shortest_path(topo, src, {dst})
    dist = hop_distances(topo, {dst})
    fibs = {}
    for d in names:
        nh = [v for v in topo.successors(d) if dist.get(v) == dist.get(d, -99) - 1]
        fibs[d] = _fib(d, width, nh)
    return Generated(f"fat-tree-{k}", topo, fibs, net, src, dst)


def random_dag(n: int, seed: int = 0, p: float = 0.3, width: int = 8) -> Generated:
    rng = random.Random(seed)
    names = [f"r{i:02d}" for i in range(n)]
    edges = set()
    for i in range(n - 1):
        edges.add((names[i], names[rng.randint(i + 1, n - 1)]))
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((names[i], names[j]))
    topo = Topology.build(names, sorted(edges), directed=True, width=width)
    src, dst = names[0], names[-1]
    net = _reach_net(topo, src, dst)
    # forward along successors that can still reach the destination
    dist = hop_distances(topo, {dst})
    fibs = {}
    for d in names:
        ok = [v for v in topo.successors(d) if v in dist]
        fibs[d] = _fib(d, width, [rng.choice(ok)] if ok else [])
    return Generated(f"dag-{n}-s{seed}", topo, fibs, net, src, dst)
