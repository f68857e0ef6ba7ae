"""Hand-built networks shared by unit and acceptance tests."""

from dvcheck import automata, dvnet
from dvcheck import reqlang as rl
from dvcheck.datamodel import Fib, FibEntry, NextHopGroup, Topology
from dvcheck.dvp import DvProtocol
from dvcheck.hsa import HeaderSpace

CASE_EDGES = [("src", "sw1"), ("sw1", "sw2"), ("sw1", "sw3"), ("sw2", "sw4"), ("sw3", "sw4"), ("sw3", "sw5"),
              ("sw4", "dst"), ("sw5", "sw4"), ("sw5", "dst")]
CASE_ROUTES = {"src": "sw1", "sw1": "sw3", "sw3": "sw5", "sw5": "dst", "sw2": "sw4", "sw4": "dst"}


def whole(dev, width, *nexthops):
    if not nexthops:
        return Fib(dev, "cp", width)
    return Fib(dev, "cp", width, (FibEntry(HeaderSpace.full(width), NextHopGroup.of(*nexthops)),))


def case_network(width=4):
    """Seven-switch DAG; traffic follows src, sw1, sw3, sw5, dst."""
    devs = sorted({x for e in CASE_EDGES for x in e})
    topo = Topology.build(devs, CASE_EDGES, directed=True, width=width)
    req = rl.parse_requirement("(all) -> [src].*[dst]")
    net = dvnet.build_product(topo, automata.lazy_automaton(req.paths, topo), "src")
    fibs = {d: whole(d, width, *([CASE_ROUTES[d]] if d in CASE_ROUTES else [])) for d in devs}
    return topo, net, fibs


def case_protocol(**kw):
    topo, net, fibs = case_network()
    proto = DvProtocol(net, topo, fibs, **kw)
    proto.initialize()
    return proto
