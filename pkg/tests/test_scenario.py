import pytest

from dvcheck import scenario
from dvcheck.errors import ConfigurationError
from conftest import SCENARIOS

TOPO = {"width": 4, "directed": True, "devices": ["A", "B", "C"], "links": [["A", "B"], ["B", "C"]]}
FIBS = {"A": {"cp": [{"match": "****", "nexthops": ["B"]}]}, "B": {"cp": [{"match": "1***", "nexthops": ["C"]}]}}


def test_inline_scenario_runs_script():
    sc = scenario.load_scenario({"topology": TOPO, "fibs": FIBS, "program": ["r = (all) -> [A].*[C]"],
                                 "script": [{"t": 2, "kind": "fib_insert", "device": "B", "match": "0***", "nexthops": ["C"]},
                                            {"t": 1, "kind": "link_down", "link": "A->B"}]})
    assert [e.kind for e in sc.script] == ["link_down", "fib_insert"]
    vr, metrics = scenario.run(sc)
    verdicts = [[r.violating.to_strings() for r in step] for step in vr.steps]
    assert verdicts == [[["0***"]], [["****"]], [["****"]]]
    assert len(metrics.per_event_messages) == 2


def test_file_scenario_resolves_relative_parts():
    sc = scenario.load_scenario(SCENARIOS / "waypoint.json")
    assert sc.default_cp() == "ospf"
    assert sc.topo.width == 64
    assert scenario.requirement_sources(sc.topo, sc.program.requirement()) == ["S"]


def test_default_sources_are_live_first_steps():
    sc = scenario.load_scenario({"topology": TOPO, "program": "r = (all) -> .*[C]"})
    assert scenario.requirement_sources(sc.topo, sc.program.requirement()) == ["A", "B", "C"]


def test_configuration_errors():
    with pytest.raises(ConfigurationError):
        scenario.load_scenario({"fibs": {}})
    two = scenario.load_scenario({"topology": TOPO, "fibs": {"A": {"x": [], "y": []}},
                                  "program": "r = (all) -> [A].*[C]"})
    with pytest.raises(ConfigurationError):
        two.default_cp()
    with pytest.raises(ConfigurationError):
        two.program.requirement("nope")
