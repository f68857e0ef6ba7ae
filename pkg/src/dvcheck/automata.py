"""Compile path-set expressions to deterministic automata over device ids.

Plain regex subtrees go through Thompson construction, subset construction
and Moore minimisation.  ``∩``/``∪`` of path-sets and the ``loopfree``
builtin are combined lazily as product automata, so only the states a
topology walk actually reaches are ever built.  :func:`compile` materialises
the reachable part into a total :class:`PathDfa` under a state budget.
"""

from __future__ import annotations

from typing import Hashable, Iterable

from . import reqlang as rl
from .datamodel import Topology
from .errors import BudgetExceeded, ConfigurationError

DEFAULT_STATE_BUDGET = 100_000


# --- label resolution --------------------------------------------------------


def resolve_labels(expr, topo: Topology):
    """Replace label atoms (and ``.``) by explicit device sets of ``topo``."""
    all_devs = frozenset(topo.devices)
    if isinstance(expr, rl.Label):
        hit = topo.devices_with_label(expr.label)
        return rl.DeviceSet(all_devs - hit if expr.negated else hit)
    if isinstance(expr, rl.AnyDevice):
        return rl.DeviceSet(all_devs)
    if isinstance(expr, (rl.Concat, rl.Alt, rl.Intersect, rl.Union)):
        return type(expr)(tuple(resolve_labels(i, topo) for i in expr.items))
    if isinstance(expr, (rl.Star, rl.Plus, rl.Opt)):
        return type(expr)(resolve_labels(expr.item, topo))
    return expr


def resolve_sources(label: rl.Label | None, topo: Topology, default: Iterable[str] = ()) -> list[str]:
    if label is None:
        return sorted(default)
    return sorted(resolve_labels(label, topo).devices)


# --- explicit DFAs ---------------------------------------------------------------


class PathDfa:
    """Total DFA over ``alphabet``; ``dead`` is the rejecting sink (or None)."""

    def __init__(self, alphabet, delta, initial, accepting, n_states):
        self.alphabet = tuple(alphabet)
        self.delta: dict[tuple[int, str], int] = delta
        self.initial = initial
        self.accepting = frozenset(accepting)
        self.n_states = n_states
        self._dead = self._find_dead()

    def _find_dead(self) -> frozenset[int]:
        # states from which no accepting state is reachable
        rev: dict[int, set[int]] = {q: set() for q in range(self.n_states)}
        for (q, _), r in self.delta.items():
            rev[r].add(q)
        alive = set(self.accepting)
        stack = list(self.accepting)
        while stack:
            q = stack.pop()
            for p in rev[q]:
                if p not in alive:
                    alive.add(p)
                    stack.append(p)
        return frozenset(set(range(self.n_states)) - alive)

    @property
    def states(self) -> range:
        return range(self.n_states)

    @property
    def live_states(self) -> list[int]:
        return [q for q in self.states if q not in self._dead]

    @property
    def dead(self) -> int | None:
        return min(self._dead) if self._dead else None

    def step(self, q: int, sym: str) -> int:
        try:
            return self.delta[(q, sym)]
        except KeyError:
            raise ConfigurationError(f"symbol {sym!r} not in automaton alphabet") from None

    def is_accepting(self, q: int) -> bool:
        return q in self.accepting

    def is_dead(self, q: int) -> bool:
        return q in self._dead

    def run(self, seq: Iterable[str]) -> int:
        q = self.initial
        for s in seq:
            q = self.step(q, s)
        return q

    def accepts(self, seq: Iterable[str]) -> bool:
        return self.is_accepting(self.run(seq))

    def minimized(self) -> "PathDfa":
        return _minimize(self)

    def to_json(self) -> dict:
        return {
            "alphabet": list(self.alphabet),
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "dead": sorted(self._dead),
            "delta": [[q, s, r] for (q, s), r in sorted(self.delta.items())],
        }


class _Nfa:
    def __init__(self):
        self.eps: list[list[int]] = []
        self.trans: list[list[tuple[frozenset, int]]] = []

    def new(self) -> int:
        self.eps.append([])
        self.trans.append([])
        return len(self.eps) - 1

    def build(self, node) -> tuple[int, int]:
        if isinstance(node, rl.DeviceSet):
            s, t = self.new(), self.new()
            self.trans[s].append((node.devices, t))
            return s, t
        if isinstance(node, rl.Epsilon):
            s = self.new()
            return s, s
        if isinstance(node, rl.Concat):
            first = None
            prev_end = None
            for item in node.items:
                s, t = self.build(item)
                if first is None:
                    first = s
                else:
                    self.eps[prev_end].append(s)
                prev_end = t
            return first, prev_end
        if isinstance(node, (rl.Alt, rl.Union)):
            s, t = self.new(), self.new()
            for item in node.items:
                a, b = self.build(item)
                self.eps[s].append(a)
                self.eps[b].append(t)
            return s, t
        if isinstance(node, (rl.Star, rl.Plus, rl.Opt)):
            s, t = self.new(), self.new()
            a, b = self.build(node.item)
            self.eps[s].append(a)
            self.eps[b].append(t)
            if not isinstance(node, rl.Plus):
                self.eps[s].append(t)
            if not isinstance(node, rl.Opt):
                self.eps[b].append(a)
            return s, t
        if isinstance(node, (rl.Label, rl.AnyDevice)):
            raise ConfigurationError("resolve labels before compiling")
        raise ConfigurationError(f"{type(node).__name__} cannot appear inside a regex operator")

    def closure(self, states: Iterable[int]) -> frozenset[int]:
        seen = set(states)
        stack = list(seen)
        while stack:
            q = stack.pop()
            for r in self.eps[q]:
                if r not in seen:
                    seen.add(r)
                    stack.append(r)
        return frozenset(seen)


def regex_dfa(node, alphabet: Iterable[str], budget: int = DEFAULT_STATE_BUDGET) -> PathDfa:
    """Minimal total DFA for a resolved, intersection-free regex."""
    alphabet = tuple(sorted(alphabet))
    nfa = _Nfa()
    start, final = nfa.build(node)
    init = nfa.closure([start])
    index = {init: 0}
    order = [init]
    delta = {}
    i = 0
    while i < len(order):
        cur = order[i]
        for sym in alphabet:
            nxt = nfa.closure(t for q in cur for syms, t in nfa.trans[q] if sym in syms)
            if nxt not in index:
                if len(order) >= budget:
                    raise BudgetExceeded(f"regex automaton exceeds {budget} states")
                index[nxt] = len(order)
                order.append(nxt)
            delta[(i, sym)] = index[nxt]
        i += 1
    accepting = {index[s] for s in order if final in s}
    return _minimize(PathDfa(alphabet, delta, 0, accepting, len(order)))


def _minimize(dfa: PathDfa) -> PathDfa:
    # Moore partition refinement, then renumber in BFS order from the initial state
    block = {q: int(q in dfa.accepting) for q in dfa.states}
    while True:
        sig = {q: (block[q],) + tuple(block[dfa.delta[(q, s)]] for s in dfa.alphabet) for q in dfa.states}
        ids: dict[tuple, int] = {}
        new_block = {q: ids.setdefault(sig[q], len(ids)) for q in dfa.states}
        if len(ids) == len(set(block.values())):
            block = new_block
            break
        block = new_block
    order = [block[dfa.initial]]
    seen = {order[0]: 0}
    rep = {}
    for q in dfa.states:
        rep.setdefault(block[q], q)
    delta = {}
    i = 0
    while i < len(order):
        b = order[i]
        for s in dfa.alphabet:
            nb = block[dfa.delta[(rep[b], s)]]
            if nb not in seen:
                seen[nb] = len(order)
                order.append(nb)
            delta[(i, s)] = seen[nb]
        i += 1
    accepting = {seen[b] for b in order if rep[b] in dfa.accepting}
    return PathDfa(dfa.alphabet, delta, 0, accepting, len(order))


# --- lazy automata --------------------------------------------------------------


class LazyAutomaton:
    """Minimal protocol shared by explicit and product automata."""

    initial: Hashable

    def step(self, q, sym):
        raise NotImplementedError

    def is_accepting(self, q) -> bool:
        raise NotImplementedError

    def is_dead(self, q) -> bool:
        raise NotImplementedError


class LoopFreeAutomaton(LazyAutomaton):
    """Accepts exactly the device sequences without a repeated device."""

    DEAD = "dead"

    def __init__(self, alphabet):
        self.alphabet = tuple(sorted(alphabet))
        self.initial = frozenset()

    def step(self, q, sym):
        if q == self.DEAD or sym in q:
            return self.DEAD
        return q | {sym}

    def is_accepting(self, q) -> bool:
        return q != self.DEAD

    def is_dead(self, q) -> bool:
        return q == self.DEAD


class ProductAutomaton(LazyAutomaton):
    def __init__(self, parts, conjunctive: bool):
        self.parts = list(parts)
        self.conjunctive = conjunctive
        self.initial = tuple(p.initial for p in self.parts)
        self.alphabet = self.parts[0].alphabet

    def step(self, q, sym):
        return tuple(p.step(s, sym) for p, s in zip(self.parts, q))

    def is_accepting(self, q) -> bool:
        vals = (p.is_accepting(s) for p, s in zip(self.parts, q))
        return all(vals) if self.conjunctive else any(vals)

    def is_dead(self, q) -> bool:
        vals = (p.is_dead(s) for p, s in zip(self.parts, q))
        return any(vals) if self.conjunctive else all(vals)


def _has_product_ops(node) -> bool:
    if isinstance(node, (rl.Intersect, rl.LoopFree)):
        return True
    if isinstance(node, (rl.Concat, rl.Alt, rl.Union)):
        return any(_has_product_ops(i) for i in node.items)
    if isinstance(node, (rl.Star, rl.Plus, rl.Opt)):
        return _has_product_ops(node.item)
    return False


def lazy_automaton(expr, topo: Topology, budget: int = DEFAULT_STATE_BUDGET) -> LazyAutomaton | PathDfa:
    """Build the (lazy) automaton for an unresolved or resolved path-set."""
    alphabet = topo.devices
    node = resolve_labels(expr, topo)
    return _lazy(node, alphabet, budget)


def _lazy(node, alphabet, budget):
    if isinstance(node, rl.LoopFree):
        return LoopFreeAutomaton(alphabet)
    if isinstance(node, rl.Intersect):
        return ProductAutomaton([_lazy(i, alphabet, budget) for i in node.items], True)
    if isinstance(node, rl.Union) and _has_product_ops(node):
        return ProductAutomaton([_lazy(i, alphabet, budget) for i in node.items], False)
    if _has_product_ops(node):
        raise ConfigurationError("'∩' and 'loopfree' may only combine whole path-sets, not appear inside regex operators")
    return regex_dfa(node, alphabet, budget)


def materialize(auto, alphabet, budget: int = DEFAULT_STATE_BUDGET) -> PathDfa:
    if isinstance(auto, PathDfa):
        return auto
    alphabet = tuple(sorted(alphabet))
    index = {auto.initial: 0}
    order = [auto.initial]
    delta = {}
    i = 0
    while i < len(order):
        q = order[i]
        for s in alphabet:
            r = auto.step(q, s)
            if r not in index:
                if len(order) >= budget:
                    raise BudgetExceeded(f"path-set automaton exceeds {budget} states")
                index[r] = len(order)
                order.append(r)
            delta[(i, s)] = index[r]
        i += 1
    accepting = {index[q] for q in order if auto.is_accepting(q)}
    return PathDfa(alphabet, delta, 0, accepting, len(order))


def compile(expr, topo: Topology, budget: int = DEFAULT_STATE_BUDGET, minimize: bool = True) -> PathDfa:
    """Total DFA accepting exactly the device sequences denoted by ``expr``."""
    auto = lazy_automaton(expr, topo, budget)
    dfa = materialize(auto, topo.devices, budget)
    return dfa.minimized() if minimize else dfa


class NumberedAutomaton:
    """Gives hashable lazy states stable small-integer ids in discovery order."""

    def __init__(self, auto):
        self.auto = auto
        self._ids: dict = {}
        self._states: list = []
        self.initial = self._id(auto.initial)

    def _id(self, q) -> int:
        if q not in self._ids:
            self._ids[q] = len(self._states)
            self._states.append(q)
        return self._ids[q]

    def state(self, i: int):
        return self._states[i]

    def step(self, i: int, sym: str) -> int:
        return self._id(self.auto.step(self._states[i], sym))

    def is_accepting(self, i: int) -> bool:
        return self.auto.is_accepting(self._states[i])

    def is_dead(self, i: int) -> bool:
        return self.auto.is_dead(self._states[i])

    def __len__(self):
        return len(self._states)
