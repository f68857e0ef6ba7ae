import random

import pytest

from dvcheck import automata, dvnet
from dvcheck import reqlang as rl
from dvcheck.datamodel import Topology
from dvcheck.errors import NotConvertibleError
from dvcheck.scenario import load_scenario
from conftest import SCENARIOS
from oracles import regex_accepts, simple_paths


def waypoint_net():
    sc = load_scenario(SCENARIOS / "waypoint.json")
    req = sc.program.requirement()
    auto = automata.lazy_automaton(req.paths, sc.topo)
    return sc.topo, dvnet.build_product(sc.topo, auto, "S")


def test_waypoint_network_shape():
    topo, net = waypoint_net()
    proj = dvnet.project(net, topo)
    assert len(net.nodes) == 13
    assert proj.count("C") == 2
    assert proj.count("W") == 3
    assert proj.count("D") == 3
    assert all(n.device == "D" for n in net.sinks)
    order = net.topological_order()
    pos = {n: i for i, n in enumerate(order)}
    assert all(pos[a] < pos[b] for a in net.nodes for b in net.successors(a))


def test_dump_format():
    _, net = waypoint_net()
    dump = net.to_json()
    assert set(dump) >= {"nodes", "edges", "root", "sinks"}
    assert dump["root"] == str(net.root)


def test_cyclic_product_is_not_convertible():
    topo = Topology.build(list("ABC"), [("A", "B"), ("B", "C")], width=4)
    req = rl.parse_requirement("(all) -> [A].*[C]")
    with pytest.raises(NotConvertibleError) as err:
        dvnet.build_product(topo, automata.lazy_automaton(req.paths, topo), "A")
    assert err.value.cycle


def test_unreachable_requirement_gives_empty_network():
    topo = Topology.build(list("ABC"), [("A", "B")], width=4)
    req = rl.parse_requirement("(all) -> [A].*[C] ∩ loopfree")
    assert dvnet.build_product(topo, automata.lazy_automaton(req.paths, topo), "A").is_empty


def test_shortest_path_dag():
    topo = Topology.build(list("ABCD"), [("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"), ("B", "C")], width=4)
    net = dvnet.build_shortest_path(topo, "A", {"D"})
    assert {str(n) for n in net.nodes} == {"A#0", "B#0", "C#0", "D#0"}
    assert sorted(net.edges[net.root]) == ["B", "C"]
    assert "C" not in net.edges[dvnet.DvNode("B", 0)]


def random_instance(seed):
    rng = random.Random(seed)
    n = rng.randint(3, 8)
    names = "abcdefgh"[:n]
    edges = {(names[rng.randrange(i)], names[i]) for i in range(1, n)}
    edges |= {(names[i], names[j]) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.3}
    topo = Topology.build(list(names), sorted(edges), width=4)
    src, dst = rng.sample(names, 2)
    if n > 2 and rng.random() < 0.6:
        way = rng.choice([d for d in names if d not in (src, dst)])
        text = f"(all) -> [{src}].*[{way}].*[{dst}] ∩ loopfree"
        pattern = f"{src}.*{way}.*{dst}"
    else:
        text = f"(all) -> [{src}].*[{dst}] ∩ loopfree"
        pattern = f"{src}.*{dst}"
    return topo, src, rl.parse_requirement(text), pattern


def dv_walk_ends_at_sink(net, path):
    node = net.root
    for d in path[1:]:
        if net.is_sink(node):
            return False
        node = net.successor(node, d)
        if node is None:
            return False
    return net.is_sink(node)


@pytest.mark.parametrize("seed", range(40))
def test_dv_paths_are_exactly_the_accepted_simple_paths(seed):
    topo, src, req, pattern = random_instance(seed)
    dfa = automata.compile(req.paths, topo)
    net = dvnet.build_product(topo, automata.lazy_automaton(req.paths, topo), src)
    names = {d: d for d in topo.devices}
    for path in simple_paths({d: topo.successors(d) for d in topo.devices}, src):
        first = regex_accepts(pattern, path, names) and not any(
            regex_accepts(pattern, path[:k], names) for k in range(1, len(path)))
        assert dfa.accepts(path) == regex_accepts(pattern, path, names)
        got = False if net.is_empty else dv_walk_ends_at_sink(net, path)
        assert got == first, path
