import itertools
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvcheck import automata
from dvcheck import reqlang as rl
from dvcheck.datamodel import Topology
from dvcheck.errors import ConfigurationError, ReqLangSyntaxError
from dvcheck.hsa import FieldLayout, HeaderSpace

EXAMPLE = """\
packet-space = (srcIp = 10.0.1.0/24) ∩ (dstIp = 10.0.2.0/24)
loop-free = loopfree
reachability = [10.0.1.0/24].*[10.0.2.0/24]
waypoint = .*[W].*
path-set = reachability ∩ waypoint ∩ loop-free
requirement = ([S]: packet-space) -> path-set
"""

LAYOUT = FieldLayout(64, {"srcIp": [0, 31], "dstIp": [32, 63]})
TOPO = Topology.build({"a": ("x",), "b": (), "c": ("x",)}, [("a", "b"), ("b", "c"), ("c", "a")], directed=True, width=4)
LABELS = {"a": "a", "b": "b", "c": "c", "x": "ac"}


def test_example_program_parses():
    prog = rl.parse_program(EXAMPLE, LAYOUT)
    req = prog.requirement()
    assert req.sources == rl.Label("S")
    assert isinstance(req.paths, rl.Intersect) and len(req.paths.items) == 3
    space = rl.eval_space(req.space, LAYOUT)
    assert space == HeaderSpace.parse("srcIp=10.0.1.0/24", layout=LAYOUT) & HeaderSpace.parse("dstIp=10.0.2.0/24", layout=LAYOUT)


def test_cpspec_block():
    text = EXAMPLE + "cpspec main {\n space: packet-space;\n rank: [(requirement, bgp), (requirement, ospf)];\n option: eventual;\n}\n"
    spec = rl.parse_cpspec(text, LAYOUT)
    assert spec.name == "main" and spec.ranked == (("requirement", "bgp"), ("requirement", "ospf"))
    with pytest.raises(ConfigurationError):
        rl.parse_cpspec(EXAMPLE + "cpspec { space: all; rank: [(nope, bgp)]; }", LAYOUT)
    with pytest.raises(ConfigurationError):
        rl.parse_cpspec(EXAMPLE + "cpspec { space: all; rank: [(requirement, bgp), (requirement, bgp)]; }", LAYOUT)


@pytest.mark.parametrize("text,line,col", [
    ("a = [S].*[D]\nr = (all) -> [S].*[D", 2, 19),
    ("r = (all) -> [S].*(", 1, 20),
    ("r = (nope = 1) -> .*", 1, 6),
    ("r = (all) [S].*", 1, 6),
])
def test_syntax_errors_carry_position(text, line, col):
    with pytest.raises(ReqLangSyntaxError) as err:
        rl.parse_program(text, FieldLayout(8, {"dst": [0, 7]}))
    assert err.value.line == line
    assert err.value.column == col


def test_product_ops_inside_regex_are_rejected():
    with pytest.raises(ConfigurationError):
        automata.compile(rl.parse_path_set("(.* ∩ [a].*)*"), TOPO)


# --- printing round trip, checked against Python regexes -----------------------

atoms = st.one_of(
    st.sampled_from(["a", "b", "c", "x"]).flatmap(lambda l: st.booleans().map(lambda n: rl.Label(l, n))),
    st.just(rl.AnyDevice()),
    st.just(rl.Epsilon()),
)


def _regexes(children):
    return st.one_of(
        st.lists(children, min_size=2, max_size=3).map(lambda xs: rl._flat(rl.Concat, xs)),
        st.lists(children, min_size=2, max_size=3).map(lambda xs: rl._flat(rl.Alt, xs)),
        children.map(rl.Star), children.map(rl.Plus), children.map(rl.Opt),
    )


regexes = st.recursive(atoms, _regexes, max_leaves=6)
path_sets = st.one_of(
    regexes,
    st.lists(st.one_of(regexes, st.just(rl.LoopFree())), min_size=2, max_size=3).map(lambda xs: rl.Intersect(tuple(xs))),
    st.lists(regexes, min_size=2, max_size=3).map(lambda xs: rl.Union(tuple(xs))),
)


def _py(node) -> str:
    if isinstance(node, rl.Label):
        return f"[{'^' if node.negated else ''}{LABELS[node.label]}]"
    if isinstance(node, rl.AnyDevice):
        return "[abc]"
    if isinstance(node, rl.Epsilon):
        return "(?:)"
    if isinstance(node, rl.Concat):
        return "".join(_py(i) for i in node.items)
    if isinstance(node, rl.Alt):
        return "(?:" + "|".join(_py(i) for i in node.items) + ")"
    sym = {rl.Star: "*", rl.Plus: "+", rl.Opt: "?"}[type(node)]
    return f"(?:{_py(node.item)}){sym}"


def _oracle(node, word: str) -> bool:
    if isinstance(node, rl.Intersect):
        return all(_oracle(i, word) for i in node.items)
    if isinstance(node, rl.Union):
        return any(_oracle(i, word) for i in node.items)
    if isinstance(node, rl.LoopFree):
        return len(set(word)) == len(word)
    return re.fullmatch(_py(node), word) is not None


WORDS = ["".join(p) for n in range(5) for p in itertools.product("abc", repeat=n)]


@settings(max_examples=150, deadline=None)
@given(path_sets)
def test_print_parse_round_trip(node):
    text = rl.to_text(node)
    again = rl.parse_path_set(text)
    assert rl.to_text(again) == text
    dfa = automata.compile(again, TOPO)
    for w in WORDS:
        assert dfa.accepts(list(w)) == _oracle(node, w), (text, w)


def test_requirement_round_trip():
    req = rl.parse_program(EXAMPLE, LAYOUT).requirement()
    again = rl.parse_requirement(rl.to_text(req), LAYOUT)
    assert again == req
