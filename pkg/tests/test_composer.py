import math

import pytest

from dvcheck.composer import (ALLOW, DROP, SUPPRESS, Composer, CpAssignment, DampingState, compose, damp,
                              elect_decider, emit_tables, register_frr)
from dvcheck.datamodel import Fib, FibEntry, NextHopGroup, Topology
from dvcheck.errors import ConfigurationError
from dvcheck.hsa import HeaderSpace
from checks import argmax_mismatches
from oracles import damping_trace


@pytest.mark.parametrize("seed", range(15))
def test_compose_is_per_packet_argmax(seed):
    assert argmax_mismatches(seed) == []


def test_residue_is_dropped():
    full = HeaderSpace.full(3)
    a = compose(full, ["x", "y"], {"x": HeaderSpace.parse("1**"), "y": HeaderSpace.parse("11*,01*")})
    assert a.space_of("x") == HeaderSpace.parse("1**")
    assert a.space_of("y") == HeaderSpace.parse("01*")
    assert a.space_of(DROP) == HeaderSpace.parse("00*")


def test_damping_worked_sequence():
    s = DampingState()
    assert [damp(s, 0) for _ in range(3)] == [ALLOW] * 3
    assert s.penalty == 3000.0 and not s.suppressed
    assert damp(s, 0) == SUPPRESS
    s = DampingState(penalty=3200.0, suppressed=True, last_update=0)
    s.decay(2 * s.half_life)
    assert math.isclose(s.penalty, 800.0, rel_tol=1e-9)
    assert not s.suppressed


def test_damping_matches_closed_form():
    times = [0, 10, 15, 400, 401, 402, 403, 1000, 1900, 1901]
    s = DampingState()
    for t, (decision, penalty) in zip(times, damping_trace(times)):
        assert damp(s, t) == decision
        assert math.isclose(s.penalty, penalty, rel_tol=1e-9)


def test_suppressed_update_keeps_assignment_until_released():
    space = HeaderSpace.full(2)
    c = Composer(space, ["a", "b"], ["i2", "i1"], DampingState(suppress_limit=1500.0, reuse_limit=700.0))
    assert c.leader == "i1"
    c.start({"a": space, "b": space})
    assert c.on_result("a", HeaderSpace.empty(2), 0) == ALLOW
    assert c.assignment.space_of("b") == space
    assert c.on_result("a", space, 1) == SUPPRESS
    assert c.assignment.space_of("b") == space
    assert not c.poll(2)
    assert c.poll(1000)
    assert c.assignment.space_of("a") == space


def test_ingresses_adopt_the_leader_assignment():
    space = HeaderSpace.full(3)
    c = Composer(space, ["a"], ["z", "m", "b"])
    c.start({"a": HeaderSpace.parse("1**")})
    adopted = c.adopt()
    assert elect_decider(["z", "m", "b"]) == "b" == c.leader
    first = adopted["b"]
    assert all(a.same_as(first) for a in adopted.values())


def _diamond():
    topo = Topology.build(list("ABCX"), [("A", "B"), ("B", "C"), ("B", "X"), ("X", "C")], width=3)
    full = HeaderSpace.full(3)
    fibs = {"A": Fib("A", "p", 3, (FibEntry(full, NextHopGroup.of("B")),)),
            "B": Fib("B", "p", 3, (FibEntry(full, NextHopGroup.of("C")),)),
            "X": Fib("X", "p", 3), "C": Fib("C", "p", 3)}
    other = {"B": Fib("B", "q", 3, (FibEntry(HeaderSpace.parse("1**"), NextHopGroup.of("X")),))}
    return topo, {"p": fibs, "q": other}


def test_virtual_cps():
    topo, vfibs = _diamond()
    alt = register_frr("p", "alternate-nexthop", {"alternates": {"B": {"C": "X"}}}, topo, vfibs)
    assert str(alt.vfibs["B"].entries[0].group) == "ANY{X}"
    tunnel = register_frr("p", "tunnel", {"path": ["B", "X", "C"]}, topo, vfibs, "t")
    assert sorted(tunnel.delta) == ["B", "X"]
    assert str(tunnel.vfibs["X"].entries[0].group) == "ANY{C}"
    cross = register_frr("p", "cross-cp", {"other": "q"}, topo, vfibs)
    b = cross.vfibs["B"]
    assert [(str(e.match), str(e.group)) for e in b.entries] == [("0**", "ANY{C}"), ("1**", "ANY{X}")]
    with pytest.raises(ConfigurationError):
        register_frr("p", "tunnel", {"path": ["B", "A", "C"]}, topo, vfibs)
    with pytest.raises(ConfigurationError):
        register_frr("p", "cross-cp", {"other": "nope"}, topo, vfibs)


def test_failover_uses_virtual_cp_within_its_verified_space():
    space = HeaderSpace.full(2)
    topo, vfibs = _diamond()
    c = Composer(space, ["p"], ["A"])
    vcp = register_frr("p", "tunnel", {"path": ["B", "X", "C"]}, topo, vfibs, "t")
    c.add_virtual(vcp, HeaderSpace.parse("1*"))
    c.start({"p": space})
    after = c.on_link_failure("p", 5)
    assert after.space_of("t") == HeaderSpace.parse("1*")
    assert after.space_of("p") == HeaderSpace.parse("0*")


def test_emitted_tables_follow_the_assignment():
    full = HeaderSpace.full(3)
    assignment = CpAssignment([(HeaderSpace.parse("1**"), "p"), (HeaderSpace.parse("0**"), DROP)])
    fibs = {"p": Fib("B", "p", 3, (FibEntry(full, NextHopGroup.of("C")),))}
    t = emit_tables(assignment, fibs, "B", 3)
    assert t.lookup(0b100) == ("p", NextHopGroup.of("C"))
    table, group = t.lookup(0b011)
    assert table == DROP and group.is_drop
    assert set(t.to_json()["tables"]) == {"p", DROP}
