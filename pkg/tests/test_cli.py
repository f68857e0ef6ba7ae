import json
import random
import re

import pytest

from dvcheck import cli
from dvcheck.scenario import load_scenario
from conftest import SCENARIOS
from oracles import forwarding_walk

WAYPOINT = str(SCENARIOS / "waypoint.json")
COMPOSE = str(SCENARIOS / "compose.json")
FSD = str(SCENARIOS / "fsd.json")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    assert code == cli.EXIT_OK
    return json.loads(out)


def fib_rows(sc, cp, links):
    rows = {}
    for dev, fib in sc.fibs_for(cp).items():
        rows[dev] = [(e.match.to_strings(), e.group.mode, [(m.dev, None) for m in e.group.members], None)
                     for e in fib.entries]
    return rows


def sample(space, rng, k=16):
    """Random concrete packets of a header space."""
    out = []
    for _ in range(k):
        w = rng.choice(space.words)
        free = ~w.mask & ((1 << w.width) - 1)
        out.append(w.value | (rng.getrandbits(w.width) & free))
    return out


def waypoint_ok(sc, cp, links, pkt):
    hops, delivered = forwarding_walk(fib_rows(sc, cp, links), lambda a, b: links.link_up(sc.topo, a, b), "S", pkt)
    return delivered and re.fullmatch("S.*W.*D", "".join(hops)) is not None


def test_verify_waypoint_matches_walk_oracle(capsys):
    rep = report(capsys, "verify", "--scenario", WAYPOINT)
    sc = load_scenario(WAYPOINT)
    from dvcheck.datamodel import LinkStateMap
    from dvcheck.hsa import HeaderSpace

    query = HeaderSpace.parse(",".join(rep["query"]), sc.topo.width)
    rng = random.Random(0)
    states = [LinkStateMap(), LinkStateMap(["W-D"]), LinkStateMap()]
    for step, links in zip(rep["steps"], states):
        (res,) = step["results"]
        verified = HeaderSpace.parse(",".join(res["verified"]) or "∅", sc.topo.width)
        for pkt in sample(query, rng):
            assert verified.contains(pkt) == waypoint_ok(sc, "ospf", links, pkt)
    assert rep["steps"][1]["results"][0]["verified"] == []
    assert rep["steps"][1]["results"][0]["violating"] == rep["query"]


def test_verify_text_and_dag_dump(capsys):
    code, out, _ = run(capsys, "verify", "--scenario", WAYPOINT, "--dump-dag")
    assert code == 0
    assert "dag from S: 13 nodes" in out
    assert "source S: verified" in out


def test_compose_splits_by_argmax(capsys):
    rep = report(capsys, "compose", "--scenario", COMPOSE)
    sc = load_scenario(COMPOSE)
    from dvcheck.datamodel import LinkStateMap
    from dvcheck.hsa import HeaderSpace

    links = LinkStateMap()
    rng = random.Random(1)
    initial = rep["steps"][0]["assignment"]
    assert {p["cp"] for p in initial} == {"bgp", "ospf"}
    for part in initial:
        space = HeaderSpace.parse(",".join(part["space"]), sc.topo.width)
        for pkt in sample(space, rng):
            want = next((cp for cp in rep["ranked"] if waypoint_ok(sc, cp, links, pkt)), "drop")
            assert part["cp"] == want
    assert rep["virtual_cps"][0]["id"] == "ospf-tunnel"
    assert rep["steps"][1]["failover"] is not None
    down = {p["cp"] for p in rep["steps"][1]["assignment"]}
    assert down == {"ospf-tunnel"}
    devices = set(rep["tables"])
    assert devices == set(sc.topo.devices)
    assert all(t["selection"] == rep["tables"]["S"]["selection"] for t in rep["tables"].values())


def test_fsd_command(capsys):
    rep = report(capsys, "fsd", "--scenario", FSD)
    assert [s["broadcasts"] for s in rep["steps"]] == [0, 1, 1, 3, 2, 2]
    code, out, _ = run(capsys, "fsd", "--scenario", FSD, "--dump-lec")
    assert code == 0 and "update (B, 101*****, BEFD)" in out


def test_fsd_script_override(capsys, tmp_path):
    script = tmp_path / "s.json"
    script.write_text(json.dumps([{"t": 1, "kind": "link_down", "link": "C-D"}]))
    rep = report(capsys, "fsd", "--scenario", FSD, "--script", str(script))
    assert [s["broadcasts"] for s in rep["steps"]] == [0, 3]


@pytest.mark.parametrize("argv", [
    ["verify", "--scenario", WAYPOINT, "--seed", "3", "--delivery", "reorder"],
    ["compose", "--scenario", COMPOSE, "--seed", "3"],
    ["fsd", "--scenario", FSD, "--delivery", "reorder", "--seed", "9"],
])
def test_reports_are_byte_identical(capsys, argv):
    _, a, _ = run(capsys, *argv, "--json")
    _, b, _ = run(capsys, *argv, "--json")
    assert a == b


def test_exit_codes(capsys, tmp_path):
    code, _, err = run(capsys, "verify", "--scenario", str(tmp_path / "missing.json"))
    assert code == cli.EXIT_CONFIG and "not found" in err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"topology": {"width": 4, "devices": ["A"], "links": []}, "program": "r = (all) -> [A"}))
    assert run(capsys, "verify", "--scenario", str(bad))[0] == cli.EXIT_CONFIG
    cyc = tmp_path / "cyc.json"
    cyc.write_text(json.dumps({"topology": {"width": 4, "devices": ["A", "B", "C"], "links": [["A", "B"], ["B", "C"]]},
                               "program": "r = (all) -> [A].*[C]"}))
    code, _, err = run(capsys, "verify", "--scenario", str(cyc))
    assert code == cli.EXIT_NOT_CONVERTIBLE and "cycle" in err


def test_bench_writes_tables_and_figures(capsys, tmp_path):
    code, out, _ = run(capsys, "bench", "--quick", "--out", str(tmp_path))
    assert code == 0
    assert out.startswith("# line\nn,node,distance,messages,links\n")
    for name in ("line", "grid", "fat_tree", "random_dag"):
        assert (tmp_path / f"{name}.csv").read_text().count("\n") > 1
        assert (tmp_path / f"{name}.png").read_bytes()[:4] == b"\x89PNG"
