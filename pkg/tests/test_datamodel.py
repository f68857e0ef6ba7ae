import pytest

from dvcheck.datamodel import (ALL, DELETE, INSERT, MODIFY, Fib, FibEntry, LinkStateMap, NextHopGroup, Topology,
                               apply_event, apply_fib_update, fibs_to_json, load_fibs, parse_event, validate)
from dvcheck.errors import ConfigurationError, ValidationError
from dvcheck.hsa import HeaderSpace as HS


@pytest.fixture
def topo():
    return Topology.build(list("ABC"), [("A", "B"), ("B", "C")], width=4)


def test_topology_json_round_trip(topo):
    again = Topology.from_json(topo.to_json())
    assert again.devices == topo.devices
    assert again.link_ids() == topo.link_ids()
    assert again.successors("B") == topo.successors("B")


def test_links_share_an_id_in_both_directions(topo):
    links = LinkStateMap(["A-B"])
    assert not links.link_up(topo, "A", "B")
    assert not links.link_up(topo, "B", "A")
    assert links.link_up(topo, "B", "C")
    assert links.with_state("A-B", True).link_up(topo, "A", "B")


def test_lookup_partitions_and_drops_unmatched():
    fib = Fib("A", "cp", 4, (FibEntry(HS.parse("1***"), NextHopGroup.of("B")),))
    parts = fib.lookup(HS.full(4))
    assert [(str(s), str(g)) for s, g in parts] == [("1***", "ANY{B}"), ("0***", str(NextHopGroup.drop()))]
    assert parts[1][1].is_drop


def test_overlapping_entries_are_rejected():
    fib = Fib("A", "cp", 4, (FibEntry(HS.parse("1***")), FibEntry(HS.parse("11**"))))
    with pytest.raises(ValidationError) as err:
        validate(fib)
    assert err.value.overlaps[0][:2] == (0, 1)


def test_updates_report_changed_space():
    fib = Fib("A", "cp", 4, (FibEntry(HS.parse("1***"), NextHopGroup.of("B")),))
    new, changed = apply_fib_update(fib, INSERT, FibEntry(HS.parse("01**"), NextHopGroup.of("C")))
    assert len(new.entries) == 2 and changed == HS.parse("01**")
    same, changed = apply_fib_update(new, MODIFY, FibEntry(HS.parse("1***"), NextHopGroup.of("B")))
    assert changed.is_empty()
    gone, changed = apply_fib_update(new, DELETE, FibEntry(HS.parse("1***")))
    assert len(gone.entries) == 1 and changed == HS.parse("1***")
    with pytest.raises(ValidationError):
        apply_fib_update(new, INSERT, FibEntry(HS.parse("11**")))
    with pytest.raises(ConfigurationError):
        apply_fib_update(new, DELETE, FibEntry(HS.parse("00**")))


def test_fib_file_format(topo):
    data = {"A": {"cp": [{"match": "1***", "mode": "all", "nexthops": ["B", {"dev": "C", "rewrite": "0***"}]}]}}
    vfibs = load_fibs(data, topo)
    e = vfibs["cp"]["A"].entries[0]
    assert e.group.mode == ALL and e.group.devices == ("B", "C")
    assert str(e.group.members[1].rewrite) == "0***"
    assert vfibs["cp"]["C"].entries == ()
    assert load_fibs(fibs_to_json(vfibs), topo) == vfibs
    with pytest.raises(ConfigurationError):
        load_fibs({"Z": {"cp": []}}, topo)
    with pytest.raises(ConfigurationError):
        load_fibs({"A": {"cp": [{"match": "1***", "nexthops": [{"dev": "B", "rewrite": "0*"}]}]}}, topo)


def test_script_events(topo):
    vfibs = load_fibs({"A": {"cp": [{"match": "1***", "nexthops": ["B"]}]}}, topo)
    ev = parse_event({"t": 1, "kind": "fib_replace", "device": "A", "old_match": "1***",
                      "match": "0***", "nexthops": ["B"]}, topo, "cp")
    new, links, changed = apply_event(ev, vfibs, LinkStateMap(), topo)
    assert changed == HS.full(4)
    assert [str(e.match) for e in new["cp"]["A"].entries] == ["0***"]
    assert [str(e.match) for e in vfibs["cp"]["A"].entries] == ["1***"]
    down = parse_event({"kind": "link_down", "from": "B", "to": "A"}, topo)
    _, links, changed = apply_event(down, vfibs, links, topo)
    assert changed is None and not links.is_up("A-B")
    with pytest.raises(ConfigurationError):
        parse_event({"kind": "link_flap", "link": "A-B"}, topo)
    with pytest.raises(ConfigurationError):
        parse_event({"kind": "link_down", "link": "A-C"}, topo)
    with pytest.raises(ConfigurationError):
        parse_event({"kind": "fib_replace", "device": "A", "match": "0***"}, topo, "cp")
