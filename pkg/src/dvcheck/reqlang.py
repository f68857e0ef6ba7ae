"""Requirement language: packet-space predicates, path-set expressions, CPSpecs.

A program is a list of ``name = expression`` definitions plus optional
``cpspec { ... }`` blocks::

    packet-space = (srcIp = 10.0.1.0/24) ∩ (dstIp = 10.0.2.0/24)
    loop-free = loopfree
    reachability = [10.0.1.0/24].*[10.0.2.0/24]
    waypoint = .*[W].*
    path-set = reachability ∩ waypoint ∩ loop-free
    requirement = ([S]: packet-space) → path-set

Path regexes are over devices: ``[label]`` is any device carrying the label,
``[^label]`` any device without it and ``.`` any device.  Regexes are
anchored at both ends.  ``∩``/``&`` and ``∪`` combine whole path-sets,
``|`` is regex alternation.  Names are inlined when referenced, so a parsed
:class:`Requirement` is self-contained.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ConfigurationError, ReqLangSyntaxError
from .hsa import FieldLayout, HeaderSpace

INTERSECT_TOKENS = ("∩", "&")
UNION_TOKENS = ("∪",)
ARROWS = ("->", "→")
OP_EQ, OP_NE = "=", "!="

# --- AST -----------------------------------------------------------------


@dataclass(frozen=True)
class FieldAtom:
    field: str
    op: str
    value: str


@dataclass(frozen=True)
class SpaceAll:
    pass


@dataclass(frozen=True)
class SpaceOp:
    op: str  # "and" | "or"
    items: tuple


@dataclass(frozen=True)
class Label:
    label: str
    negated: bool = False


@dataclass(frozen=True)
class AnyDevice:
    pass


@dataclass(frozen=True)
class DeviceSet:
    """A resolved label atom."""

    devices: frozenset


@dataclass(frozen=True)
class Epsilon:
    pass


@dataclass(frozen=True)
class Concat:
    items: tuple


@dataclass(frozen=True)
class Alt:
    items: tuple


@dataclass(frozen=True)
class Star:
    item: object


@dataclass(frozen=True)
class Plus:
    item: object


@dataclass(frozen=True)
class Opt:
    item: object


@dataclass(frozen=True)
class Intersect:
    items: tuple


@dataclass(frozen=True)
class Union:
    items: tuple


@dataclass(frozen=True)
class LoopFree:
    pass


@dataclass(frozen=True)
class Requirement:
    space: object
    paths: object
    sources: Label | None = None
    name: str = field(default="requirement", compare=False)


@dataclass(frozen=True)
class CpSpec:
    space: object
    ranked: tuple  # ((requirement name, cp id), ...), most preferred first
    option: str = "eventual"
    name: str = field(default="cpspec", compare=False)

    def __post_init__(self):
        if not self.ranked:
            raise ConfigurationError("cpspec needs at least one (requirement, cp) pair")
        cps = [cp for _, cp in self.ranked]
        if len(set(cps)) != len(cps):
            raise ConfigurationError(f"cpspec ranks a CP twice: {cps}")


@dataclass
class Program:
    spaces: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    requirements: dict = field(default_factory=dict)
    cpspecs: list = field(default_factory=list)

    def requirement(self, name: str | None = None) -> Requirement:
        if not self.requirements:
            raise ConfigurationError("program defines no requirement")
        if name is None:
            return list(self.requirements.values())[-1]
        try:
            return self.requirements[name]
        except KeyError:
            raise ConfigurationError(f"no requirement named {name!r}") from None


# --- parsing ---------------------------------------------------------------

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")
_VALUE = re.compile(r"[A-Za-z0-9_.:/]+")
_SPACE_OPS = ("≠", "!=", "=")


class _Parser:
    def __init__(self, text: str, line: int = 1, col0: int = 1, env: Program | None = None,
                 layout: FieldLayout | None = None):
        self.s = text
        self.i = 0
        self.line = line
        self.col0 = col0
        self.env = env or Program()
        self.layout = layout

    # helpers
    def error(self, msg: str, at: int | None = None):
        pos = self.i if at is None else at
        raise ReqLangSyntaxError(msg, self.line, self.col0 + pos)

    def ws(self):
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def peek(self, tok: str) -> bool:
        self.ws()
        return self.s.startswith(tok, self.i)

    def take(self, *toks: str) -> str | None:
        self.ws()
        for t in toks:
            if self.s.startswith(t, self.i):
                self.i += len(t)
                return t
        return None

    def expect(self, tok: str):
        if self.take(tok) is None:
            self.error(f"expected {tok!r}")

    def at_end(self) -> bool:
        self.ws()
        return self.i >= len(self.s)

    def name(self) -> str | None:
        self.ws()
        m = _NAME.match(self.s, self.i)
        if not m:
            return None
        # a hyphen directly followed by '>' belongs to an arrow
        text = m.group(0)
        if text.endswith("-") and self.s.startswith(">", m.end()):
            text = text[:-1]
        self.i += len(text)
        return text

    def finish(self):
        if not self.at_end():
            self.error(f"unexpected {self.s[self.i]!r}")

    # packet spaces
    def space(self):
        items = [self.space_and()]
        while self.take("∪", "|"):
            items.append(self.space_and())
        return _flat(SpaceOp, items, op="or")

    def space_and(self):
        items = [self.space_atom()]
        while self.take(*INTERSECT_TOKENS):
            items.append(self.space_atom())
        return _flat(SpaceOp, items, op="and")

    def space_atom(self):
        self.ws()
        start = self.i
        if self.take("("):
            save = self.i
            atom = self._field_atom()
            if atom is not None:
                self.expect(")")
                return atom
            self.i = save
            inner = self.space()
            self.expect(")")
            return inner
        atom = self._field_atom()
        if atom is not None:
            return atom
        self.i = start
        nm = self.name()
        if nm is None:
            self.error("expected a packet-space predicate")
        if nm == "all":
            return SpaceAll()
        if nm in self.env.spaces:
            return self.env.spaces[nm]
        self.error(f"unknown packet-space name {nm!r}", start)

    def _field_atom(self):
        save = self.i
        self.ws()
        fstart = self.i
        nm = self.name()
        if nm is None:
            self.i = save
            return None
        if self.take("."):
            sub = self.name()
            if sub is None:
                self.i = save
                return None
            nm = f"{nm}.{sub}"
        op = self.take(*_SPACE_OPS)
        if op is None:
            self.i = save
            return None
        self.ws()
        m = _VALUE.match(self.s, self.i)
        if not m:
            self.error("expected a field value")
        self.i = m.end()
        fname = nm[2:] if nm.startswith("h.") else nm
        if self.layout is not None and not self.layout.has_field(fname):
            raise ReqLangSyntaxError(f"unknown field {fname!r}", self.line, self.col0 + fstart)
        return FieldAtom(fname, OP_EQ if op == "=" else OP_NE, m.group(0))

    # path sets
    def paths(self):
        items = [self.path_union()]
        while self.take(*INTERSECT_TOKENS):
            items.append(self.path_union())
        return _flat(Intersect, items)

    def path_union(self):
        items = [self.regex()]
        while self.take(*UNION_TOKENS):
            items.append(self.regex())
        return _flat(Union, items)

    def regex(self):
        items = [self.concat()]
        while self.take("|"):
            items.append(self.concat())
        return _flat(Alt, items)

    def concat(self):
        items = []
        while True:
            self.ws()
            if self.i >= len(self.s) or self.s[self.i] in ")|&∩∪;]" or self._at_arrow():
                break
            items.append(self.postfix())
        if not items:
            self.error("expected a path expression")
        return _flat(Concat, items)

    def _at_arrow(self):
        return any(self.s.startswith(a, self.i) for a in ARROWS)

    def postfix(self):
        node = self.path_atom()
        while True:
            if self.take("*"):
                node = Star(node)
            elif self.take("+"):
                node = Plus(node)
            elif self.take("?"):
                node = Opt(node)
            else:
                return node

    def path_atom(self):
        self.ws()
        start = self.i
        c = self.s[self.i]
        if c == "[":
            end = self.s.find("]", self.i)
            if end < 0:
                self.error("unclosed bracket", start)
            body = self.s[self.i + 1:end].strip()
            self.i = end + 1
            neg = body.startswith("^")
            if neg:
                body = body[1:].strip()
            if not body:
                self.error("empty label", start)
            return Label(body, neg)
        if c == ".":
            self.i += 1
            return AnyDevice()
        if c == "(":
            self.i += 1
            if self.take(")"):
                return Epsilon()
            inner = self.paths()
            if self.take(")") is None:
                self.error("unclosed parenthesis", start)
            return inner
        nm = self.name()
        if nm is None:
            self.error(f"unexpected {c!r}")
        if nm == "loopfree":
            return LoopFree()
        if nm in self.env.paths:
            return self.env.paths[nm]
        self.error(f"unknown path-set name {nm!r}", start)

    # requirement
    def requirement(self, name="requirement") -> Requirement:
        arrow_at = _find_arrow(self.s)
        if arrow_at is None:
            self.error("expected '->' in requirement", len(self.s))
        arrow_len = 2 if self.s.startswith("->", arrow_at) else 1
        # right-hand side first: most malformed inputs are path-set typos
        rhs = _Parser(self.s[arrow_at + arrow_len:], self.line, self.col0 + arrow_at + arrow_len, self.env, self.layout)
        paths = rhs.paths()
        rhs.finish()
        lhs_text = self.s[:arrow_at]
        lhs = _Parser(lhs_text, self.line, self.col0, self.env, self.layout)
        sources = None
        lhs.ws()
        wrapped = lhs.s.strip().startswith("(") and _matching_paren(lhs.s.strip(), 0) == len(lhs.s.strip()) - 1
        if wrapped:
            lhs.take("(")
        if lhs.peek("["):
            bstart = lhs.i
            end = lhs.s.find("]", lhs.i)
            if end < 0:
                lhs.error("unclosed bracket", bstart)
            body = lhs.s[lhs.i + 1:end].strip()
            lhs.i = end + 1
            if lhs.take(":") is None:
                lhs.error("expected ':' after sources")
            neg = body.startswith("^")
            sources = Label(body[1:].strip() if neg else body, neg)
        space = lhs.space()
        if wrapped:
            lhs.expect(")")
        lhs.finish()
        return Requirement(space, paths, sources, name)


def _flat(cls, items, op=None):
    if len(items) == 1:
        return items[0]
    out = []
    for it in items:
        if isinstance(it, cls) and (op is None or it.op == op):
            out.extend(it.items)
        else:
            out.append(it)
    return cls(op, tuple(out)) if op is not None else cls(tuple(out))


def _matching_paren(s: str, i: int) -> int | None:
    depth = 0
    in_bracket = False
    for j in range(i, len(s)):
        c = s[j]
        if in_bracket:
            in_bracket = c != "]"
            continue
        if c == "[":
            in_bracket = True
        elif c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth == 0:
                return j
    return None


def _find_arrow(s: str) -> int | None:
    in_bracket = False
    for j, c in enumerate(s):
        if in_bracket:
            in_bracket = c != "]"
            continue
        if c == "[":
            in_bracket = True
        elif s.startswith("->", j) or c == "→":
            return j
    return None


_DEF = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_\-]*)\s*=(?!=)")
_CPSPEC = re.compile(r"\s*cpspec\b\s*([A-Za-z_][A-Za-z0-9_\-]*)?\s*\{")


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def _is_space_expr(text: str, env: Program) -> bool:
    if any(op in text for op in _SPACE_OPS):
        return True
    first = _NAME.search(text)
    return bool(first) and (first.group(0) in env.spaces or first.group(0) == "all") and "[" not in text


def parse_program(text: str, layout: FieldLayout | None = None) -> Program:
    prog = Program()
    lines = text.splitlines()
    n = 0
    while n < len(lines):
        raw = _strip_comment(lines[n])
        lineno = n + 1
        n += 1
        if not raw.strip():
            continue
        m = _CPSPEC.match(raw)
        if m:
            block = [raw[m.end():]]
            while "}" not in block[-1] and n < len(lines):
                block.append(_strip_comment(lines[n]))
                n += 1
            body = "\n".join(block)
            if "}" not in body:
                raise ReqLangSyntaxError("unclosed cpspec block", lineno, len(raw))
            body = body[:body.index("}")]
            prog.cpspecs.append(_parse_cpspec_body(body, prog, layout, lineno, m.group(1) or "cpspec"))
            continue
        m = _DEF.match(raw)
        if not m:
            raise ReqLangSyntaxError("expected 'name = expression' or a cpspec block", lineno, 1)
        name = m.group(1)
        rhs = raw[m.end():]
        p = _Parser(rhs, lineno, m.end() + 1, prog, layout)
        if _find_arrow(rhs) is not None:
            prog.requirements[name] = p.requirement(name)
        elif _is_space_expr(rhs, prog):
            prog.spaces[name] = p.space()
            p.finish()
        else:
            prog.paths[name] = p.paths()
            p.finish()
    return prog


def _parse_cpspec_body(body: str, env: Program, layout, lineno: int, name: str) -> CpSpec:
    fields: dict[str, str] = {}
    for part in body.split(";"):
        if not part.strip():
            continue
        if ":" not in part:
            raise ReqLangSyntaxError(f"expected 'key: value' in cpspec, got {part.strip()!r}", lineno, 1)
        k, v = part.split(":", 1)
        fields[k.strip()] = v.strip()
    for key in ("space", "rank"):
        if key not in fields:
            raise ReqLangSyntaxError(f"cpspec missing {key!r}", lineno, 1)
    p = _Parser(fields["space"], lineno, 1, env, layout)
    space = p.space()
    p.finish()
    pairs = re.findall(r"\(\s*([A-Za-z_][\w\-]*)\s*,\s*([A-Za-z_][\w\-]*)\s*\)", fields["rank"])
    if not pairs:
        raise ReqLangSyntaxError("cpspec rank needs (requirement, cp) pairs", lineno, 1)
    for req, _ in pairs:
        if req not in env.requirements:
            raise ConfigurationError(f"cpspec ranks unknown requirement {req!r}")
    return CpSpec(space, tuple(pairs), fields.get("option", "eventual"), name)


def parse_requirement(text: str, layout: FieldLayout | None = None) -> Requirement:
    """Parse either a bare requirement line or a program; return its last requirement."""
    content = [(i + 1, _strip_comment(l)) for i, l in enumerate(text.splitlines()) if _strip_comment(l).strip()]
    if len(content) != 1:
        return parse_program(text, layout).requirement()
    lineno, line = content[0]
    try:
        return _Parser(line, lineno, 1, None, layout).requirement()
    except ReqLangSyntaxError as first:
        if not _DEF.match(line):
            raise
        try:
            return parse_program(text, layout).requirement()
        except ReqLangSyntaxError:
            raise first from None


def parse_cpspec(text: str, layout: FieldLayout | None = None) -> CpSpec:
    prog = parse_program(text, layout)
    if not prog.cpspecs:
        raise ConfigurationError("no cpspec block found")
    return prog.cpspecs[-1]


def parse_path_set(text: str) -> object:
    p = _Parser(text)
    out = p.paths()
    p.finish()
    return out


def parse_space(text: str, layout: FieldLayout | None = None) -> object:
    p = _Parser(text, layout=layout)
    out = p.space()
    p.finish()
    return out


# --- printing ----------------------------------------------------------------


def to_text(node) -> str:
    if isinstance(node, Requirement):
        src = ""
        if node.sources is not None:
            src = f"{to_text(node.sources)}: "
        return f"({src}{to_text(node.space)}) -> {to_text(node.paths)}"
    if isinstance(node, FieldAtom):
        return f"({node.field} {node.op} {node.value})"
    if isinstance(node, SpaceAll):
        return "all"
    if isinstance(node, SpaceOp):
        sep = " ∩ " if node.op == "and" else " ∪ "
        return "(" + sep.join(to_text(i) for i in node.items) + ")"
    if isinstance(node, Label):
        return f"[{'^' if node.negated else ''}{node.label}]"
    if isinstance(node, AnyDevice):
        return "."
    if isinstance(node, Epsilon):
        return "()"
    if isinstance(node, LoopFree):
        return "loopfree"
    if isinstance(node, DeviceSet):
        raise ConfigurationError("resolved device sets have no surface syntax")
    if isinstance(node, Concat):
        return "".join(_wrap_concat(i) for i in node.items)
    if isinstance(node, Alt):
        return "(" + "|".join(to_text(i) for i in node.items) + ")"
    if isinstance(node, Intersect):
        return "(" + " ∩ ".join(to_text(i) for i in node.items) + ")"
    if isinstance(node, Union):
        return "(" + " ∪ ".join(to_text(i) for i in node.items) + ")"
    for cls, sym in ((Star, "*"), (Plus, "+"), (Opt, "?")):
        if isinstance(node, cls):
            inner = node.item
            text = to_text(inner)
            if isinstance(inner, Concat):
                text = f"({text})"
            return text + sym
    raise TypeError(f"cannot print {node!r}")


def _wrap_concat(node) -> str:
    text = to_text(node)
    return f"({text})" if isinstance(node, Concat) else text


# --- evaluation ------------------------------------------------------------


def eval_space(pred, layout: FieldLayout) -> HeaderSpace:
    if isinstance(pred, FieldAtom):
        eq = layout.field_space(pred.field, pred.value)
        return eq if pred.op == OP_EQ else eq.complement()
    if isinstance(pred, SpaceAll):
        return HeaderSpace.full(layout.width)
    if isinstance(pred, SpaceOp):
        parts = [eval_space(i, layout) for i in pred.items]
        acc = parts[0]
        for p in parts[1:]:
            acc = acc & p if pred.op == "and" else acc | p
        return acc
    raise TypeError(f"not a packet-space predicate: {pred!r}")
