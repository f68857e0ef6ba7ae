import pytest

from dvcheck.datamodel import Fib, FibEntry, NextHop, NextHopGroup, Topology
from dvcheck.errors import ConfigurationError, ContractViolation
from dvcheck.fsd import FsdNetwork, LecTable, LocalPath, splice
from dvcheck.hsa import HeaderRewrite, HeaderSpace as HS
from checks import eventual_consistency_mismatches, run_walkthrough


def test_splice_cuts_loops():
    assert splice(("A", "B"), LocalPath(("C", "D"), True)) == LocalPath(("A", "B", "C", "D"), True)
    assert splice(("A", "B"), LocalPath(("C", "A", "D"), True)) == LocalPath(("A", "B", "C"), False)
    assert str(LocalPath(("A", "B"), False)) == "AB:NULL"
    assert str(LocalPath(("a1", "b2"), True)) == "a1-b2"


def test_lec_table_merges_same_path():
    t = LecTable("A", 3)
    p, q = LocalPath(("A",), True), LocalPath(("A", "B"), True)
    t.set_path(HS.full(3), p)
    t.set_path(HS.parse("1**"), q)
    t.set_path(HS.parse("10*"), p)
    assert len(t.entries) == 2
    assert t.covered() == HS.full(3)
    assert t.path_of(0b101) == p and t.path_of(0b110) == q


def test_initial_tables():
    _, snaps = run_walkthrough()
    init = snaps[0]
    assert ((("10******",), "ABCD")) in init["A"]
    assert ((("111*****",), "ABEFD")) in init["A"]
    assert ((("110*****",), "BE:NULL")) in init["B"]


def test_walkthrough_counts():
    counts, _ = run_walkthrough()
    assert counts == [1, 1, 3, 2, 2]


def test_rewrites_are_rejected():
    topo = Topology.build(list("AB"), [("A", "B")], width=2)
    fib = Fib("A", "cp", 2, (FibEntry(HS.full(2), NextHopGroup("ANY", (NextHop("B", HeaderRewrite.parse("1*")),))),))
    with pytest.raises(ConfigurationError):
        FsdNetwork(topo, {"A": fib})


def test_forwarding_loops_are_reported():
    topo = Topology.build(list("AB"), [("A", "B")], width=2)
    full = HS.full(2)
    fibs = {"A": Fib("A", "cp", 2, (FibEntry(full, NextHopGroup.of("B")),)),
            "B": Fib("B", "cp", 2, (FibEntry(HS.parse("1*"), NextHopGroup.of("A")), FibEntry(HS.parse("0*"), NextHopGroup.of("LOCAL"))))}
    fsd = FsdNetwork(topo, fibs).initialize()
    assert fsd.loops["A"] == HS.parse("1*")
    assert fsd.nodes["A"].table.path_of(0b00) == LocalPath(("A", "B"), True)
    assert not fsd.nodes["A"].table.path_of(0b10).delivered


def test_query_covers_the_space():
    topo = Topology.build(list("AB"), [("A", "B")], width=2)
    fsd = FsdNetwork(topo, {"A": Fib("A", "cp", 2), "B": Fib("B", "cp", 2)}).initialize()
    (space, path), = fsd.query("A", HS.full(2))
    assert space == HS.full(2) and path == LocalPath(("A",), False)
    fsd.sim._queue.append(((0, "", 0), None))
    with pytest.raises(ContractViolation):
        fsd.query("A", HS.full(2))


@pytest.mark.parametrize("seed", range(10))
def test_incremental_tables_match_fresh_run(seed):
    assert eventual_consistency_mismatches(seed) == []
