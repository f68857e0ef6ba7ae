"""Ternary header-space algebra.

A header is a fixed-width bit string.  A :class:`HeaderSpace` is a finite
union of ternary wildcard words; every violation set, FIB match and packet
predicate in the package is one of these.  Position 0 of a word string is the
most significant header bit.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import ConfigurationError

DEFAULT_WIDTH = 32
EMPTY_TOKENS = {"", "∅", "empty", "EMPTY"}


def _bit(width: int, pos: int) -> int:
    return 1 << (width - 1 - pos)


@dataclass(frozen=True)
class Word:
    """One ternary word: ``mask`` marks fixed bits, ``value`` holds them."""

    width: int
    mask: int
    value: int

    @classmethod
    def parse(cls, text: str) -> "Word":
        mask = value = 0
        for ch in text:
            mask <<= 1
            value <<= 1
            if ch == "1":
                mask |= 1
                value |= 1
            elif ch == "0":
                mask |= 1
            elif ch not in "*x":
                raise ConfigurationError(f"bad ternary symbol {ch!r} in {text!r}")
        return cls(len(text), mask, value)

    @classmethod
    def full(cls, width: int) -> "Word":
        return cls(width, 0, 0)

    def __str__(self) -> str:
        out = []
        for pos in range(self.width):
            b = _bit(self.width, pos)
            out.append("*" if not self.mask & b else ("1" if self.value & b else "0"))
        return "".join(out)

    def meet(self, other: "Word") -> "Word | None":
        if (self.mask & other.mask) & (self.value ^ other.value):
            return None
        return Word(self.width, self.mask | other.mask, self.value | other.value)

    def covers(self, other: "Word") -> bool:
        return (self.mask & ~other.mask) == 0 and (other.value & self.mask) == self.value

    def matches(self, packet: int) -> bool:
        return (packet & self.mask) == self.value

    def minus(self, other: "Word") -> list["Word"]:
        if self.meet(other) is None:
            return [self]
        pieces = []
        cur_mask, cur_value = self.mask, self.value
        free = other.mask & ~self.mask
        for pos in range(self.width):
            b = _bit(self.width, pos)
            if not free & b:
                continue
            flipped = (other.value & b) ^ b
            pieces.append(Word(self.width, cur_mask | b, cur_value | flipped))
            cur_mask |= b
            cur_value |= other.value & b
        return pieces


def _check(a: "HeaderSpace", b: "HeaderSpace") -> None:
    if a.width != b.width:
        raise ConfigurationError(f"header width mismatch: {a.width} vs {b.width}")


def _prune(words: Iterable[Word]) -> tuple[Word, ...]:
    """Drop subsumed words and merge sibling words until nothing changes."""
    ws = list(dict.fromkeys(words))
    while True:
        kept: list[Word] = []
        for w in sorted(ws, key=lambda w: (bin(w.mask).count("1"), w.mask, w.value)):
            if not any(k.covers(w) for k in kept):
                kept.append(w)
        merged = _merge_siblings(kept)
        stable = len(merged) == len(ws)
        ws = merged
        if stable:
            break
    return tuple(sorted(ws, key=lambda w: (w.mask, w.value)))


def _merge_siblings(ws: list[Word]) -> list[Word]:
    by_mask: dict[int, set[int]] = {}
    for w in ws:
        by_mask.setdefault(w.mask, set()).add(w.value)
    out: list[Word] = []
    width = ws[0].width if ws else 0
    for mask, values in by_mask.items():
        values = set(values)
        done: set[int] = set()
        for v in sorted(values):
            if v in done:
                continue
            partner = None
            for pos in range(width):
                b = _bit(width, pos)
                if mask & b and (v ^ b) in values and (v ^ b) not in done:
                    partner = b
                    break
            if partner is None:
                out.append(Word(width, mask, v))
                done.add(v)
            else:
                done.update((v, v ^ partner))
                out.append(Word(width, mask & ~partner, v & ~partner))
    return out


class HeaderSpace:
    """Immutable set of headers.  ``==`` is semantic equality."""

    __slots__ = ("width", "words")
    __hash__ = None  # semantic equality has no cheap canonical hash

    def __init__(self, width: int, words: Iterable[Word] = ()):
        words = tuple(words)
        for w in words:
            if w.width != width:
                raise ConfigurationError(f"word {w} does not have width {width}")
        self.width = width
        self.words = _prune(words) if len(words) > 1 else words

    # construction -----------------------------------------------------
    @classmethod
    def empty(cls, width: int) -> "HeaderSpace":
        return cls(width)

    @classmethod
    def full(cls, width: int) -> "HeaderSpace":
        return cls(width, [Word.full(width)])

    @classmethod
    def parse(cls, text: str, width: int | None = None, layout: "FieldLayout | None" = None) -> "HeaderSpace":
        """Parse ``"10**,1*0*"``, ``"∅"`` or ``"dst=10.0.0.0/8"`` (needs a layout)."""
        text = text.strip()
        if width is None:
            width = layout.width if layout is not None else None
        if text in EMPTY_TOKENS:
            if width is None:
                raise ConfigurationError("empty space needs an explicit width")
            return cls.empty(width)
        words: list[Word] = []
        parts: list[HeaderSpace] = []
        for token in (t.strip() for t in text.split(",")):
            if "=" in token:
                if layout is None:
                    raise ConfigurationError(f"field syntax {token!r} needs a field layout")
                name, value = token.split("=", 1)
                parts.append(layout.field_space(name.strip(), value.strip()))
                continue
            w = Word.parse(token)
            if width is not None and w.width != width:
                raise ConfigurationError(f"word {token!r} has width {w.width}, expected {width}")
            width = w.width
            words.append(w)
        space = cls(width, words)
        for p in parts:
            space = space | p
        return space

    # algebra ------------------------------------------------------------
    def __and__(self, other: "HeaderSpace") -> "HeaderSpace":
        _check(self, other)
        out = []
        for a in self.words:
            for b in other.words:
                m = a.meet(b)
                if m is not None:
                    out.append(m)
        return HeaderSpace(self.width, out)

    def __or__(self, other: "HeaderSpace") -> "HeaderSpace":
        _check(self, other)
        if not other.words:
            return self
        if not self.words:
            return other
        return HeaderSpace(self.width, self.words + other.words)

    def __sub__(self, other: "HeaderSpace") -> "HeaderSpace":
        _check(self, other)
        pieces = list(self.words)
        for b in other.words:
            nxt: list[Word] = []
            for a in pieces:
                nxt.extend(a.minus(b))
            pieces = nxt
            if not pieces:
                break
        return HeaderSpace(self.width, pieces)

    def __xor__(self, other: "HeaderSpace") -> "HeaderSpace":
        return (self - other) | (other - self)

    def complement(self) -> "HeaderSpace":
        return HeaderSpace.full(self.width) - self

    # predicates ---------------------------------------------------------
    def is_empty(self) -> bool:
        return not self.words

    def __bool__(self) -> bool:
        return bool(self.words)

    def issubset(self, other: "HeaderSpace") -> bool:
        return (self - other).is_empty()

    def __le__(self, other: "HeaderSpace") -> bool:
        return self.issubset(other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HeaderSpace):
            return NotImplemented
        _check(self, other)
        return self.issubset(other) and other.issubset(self)

    def contains(self, packet: int) -> bool:
        return any(w.matches(packet) for w in self.words)

    def __contains__(self, packet: int) -> bool:
        return self.contains(packet)

    # misc -------------------------------------------------------------
    def __iter__(self) -> Iterator[Word]:
        return iter(self.words)

    def __len__(self) -> int:
        return len(self.words)

    def to_strings(self) -> list[str]:
        return [str(w) for w in self.words]

    def __str__(self) -> str:
        return ",".join(self.to_strings()) if self.words else "∅"

    def __repr__(self) -> str:
        return f"HeaderSpace({str(self)!r})"


def intersect(a: HeaderSpace, b: HeaderSpace) -> HeaderSpace:
    return a & b


def union(a: HeaderSpace, b: HeaderSpace) -> HeaderSpace:
    return a | b


def subtract(a: HeaderSpace, b: HeaderSpace) -> HeaderSpace:
    return a - b


def symmetric_difference(a: HeaderSpace, b: HeaderSpace) -> HeaderSpace:
    return a ^ b


def is_empty(a: HeaderSpace) -> bool:
    return a.is_empty()


def is_subset(a: HeaderSpace, b: HeaderSpace) -> bool:
    return a.issubset(b)


def equal(a: HeaderSpace, b: HeaderSpace) -> bool:
    return a == b


@dataclass(frozen=True)
class HeaderRewrite:
    """Forces the bits in ``clear_mask`` to ``set_values``; leaves the rest."""

    width: int
    clear_mask: int = 0
    set_values: int = 0

    @classmethod
    def identity(cls, width: int) -> "HeaderRewrite":
        return cls(width)

    @classmethod
    def parse(cls, text: str) -> "HeaderRewrite":
        # "1***" forces the first bit to 1
        w = Word.parse(text)
        return cls(w.width, w.mask, w.value)

    @property
    def is_identity(self) -> bool:
        return self.clear_mask == 0

    def apply_packet(self, packet: int) -> int:
        return (packet & ~self.clear_mask) | (self.set_values & self.clear_mask)

    def __str__(self) -> str:
        return str(Word(self.width, self.clear_mask, self.set_values & self.clear_mask))


def apply_rewrite(r: HeaderRewrite, a: HeaderSpace) -> HeaderSpace:
    if r.width != a.width:
        raise ConfigurationError(f"header width mismatch: {r.width} vs {a.width}")
    cm, sv = r.clear_mask, r.set_values & r.clear_mask
    return HeaderSpace(a.width, [Word(a.width, w.mask | cm, (w.value & ~cm) | sv) for w in a.words])


def inverse_image(r: HeaderRewrite, a: HeaderSpace) -> HeaderSpace:
    """All headers ``p`` with ``r(p)`` in ``a``."""
    if r.width != a.width:
        raise ConfigurationError(f"header width mismatch: {r.width} vs {a.width}")
    if r.is_identity:
        return a
    cm, sv = r.clear_mask, r.set_values & r.clear_mask
    out = []
    for w in a.words:
        if (w.mask & cm) & (w.value ^ sv):
            continue
        out.append(Word(a.width, w.mask & ~cm, w.value & ~cm))
    return HeaderSpace(a.width, out)


class FieldLayout:
    """Named bit ranges of the header, ``{name: (lo, hi)}`` inclusive."""

    def __init__(self, width: int = DEFAULT_WIDTH, fields: dict | None = None):
        self.width = width
        self.fields: dict[str, tuple[int, int]] = {}
        for name, rng in (fields or {}).items():
            lo, hi = int(rng[0]), int(rng[1])
            if not 0 <= lo <= hi < width:
                raise ConfigurationError(f"field {name!r} range [{lo},{hi}] outside width {width}")
            self.fields[name] = (lo, hi)

    def _range(self, name: str) -> tuple[int, int]:
        key = name.split(".", 1)[1] if name.startswith("h.") else name
        try:
            return self.fields[key]
        except KeyError:
            raise ConfigurationError(f"unknown header field {name!r}") from None

    def has_field(self, name: str) -> bool:
        key = name.split(".", 1)[1] if name.startswith("h.") else name
        return key in self.fields

    def field_space(self, name: str, value: str) -> HeaderSpace:
        """Space of headers whose field equals ``value`` (optionally ``/prefixlen``)."""
        lo, hi = self._range(name)
        fw = hi - lo + 1
        text = value.strip()
        plen = fw
        if "/" in text:
            text, p = text.rsplit("/", 1)
            plen = int(p)
        if text.count(".") == 3:
            if fw != 32:
                raise ConfigurationError(f"dotted address {value!r} needs a 32-bit field, {name!r} has {fw}")
            num = int(ipaddress.IPv4Address(text))
        else:
            num = int(text, 0)
        if not 0 <= plen <= fw or num >= (1 << fw):
            raise ConfigurationError(f"value {value!r} does not fit field {name!r} of {fw} bits")
        mask = value_bits = 0
        for i in range(plen):
            pos = lo + i
            b = _bit(self.width, pos)
            mask |= b
            if num >> (fw - 1 - i) & 1:
                value_bits |= b
        return HeaderSpace(self.width, [Word(self.width, mask, value_bits)])

    def to_json(self) -> dict:
        return {name: [lo, hi] for name, (lo, hi) in self.fields.items()}
