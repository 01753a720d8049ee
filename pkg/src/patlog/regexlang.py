"""Regular-language constants for membership atoms.

Languages appear in two places: input membership (the erased input word of a
path component lies in L) and, over the free word monoid, output membership.
A constant is written either as a small regular expression — literals,
concatenation, `|`, `*`, parentheses, `eps` — or as `@file` naming an
automaton file whose accepted (erased) words give the language.

Both compile to an ε-free NFA.  Negated membership is decided by on-the-fly
subset simulation with flipped acceptance; the number of distinct subsets is
capped because determinisation is the one genuinely exponential step here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import ParseError, ResourceLimitError


@dataclass(frozen=True)
class Lang:
    """ε-free NFA over single-symbol letters."""

    states: tuple
    initial: frozenset
    finals: frozenset
    delta: dict  # (state, symbol) -> frozenset of states
    alphabet: frozenset
    source: str = ""  # original concrete syntax, for error messages / reports

    def move(self, subset: frozenset, symbol: str) -> frozenset:
        nxt = set()
        for q in subset:
            nxt |= self.delta.get((q, symbol), frozenset())
        return frozenset(nxt)

    def accepts(self, word: Sequence[str]) -> bool:
        cur = self.initial
        for sym in word:
            cur = self.move(cur, sym)
            if not cur:
                return False
        return bool(cur & self.finals)


class SubsetSim:
    """Deterministic simulation of a Lang by subsets, with a cap on how many
    distinct subsets may be materialised (resource guard for complementation)."""

    def __init__(self, lang: Lang, cap: int = 4096):
        self.lang = lang
        self.cap = cap
        self._seen = {lang.initial}
        self._memo: dict = {}

    @property
    def start(self) -> frozenset:
        return self.lang.initial

    def step(self, subset: frozenset, symbol: str) -> frozenset:
        key = (subset, symbol)
        nxt = self._memo.get(key)
        if nxt is None:
            nxt = self.lang.move(subset, symbol)
            self._memo[key] = nxt
            if nxt not in self._seen:
                self._seen.add(nxt)
                if len(self._seen) > self.cap:
                    raise ResourceLimitError(
                        f"subset construction for language {self.lang.source!r} "
                        f"exceeded the cap of {self.cap} subsets"
                    )
        return nxt

    def accepting(self, subset: frozenset) -> bool:
        return bool(subset & self.lang.finals)


def complement_lang(lang: Lang, alphabet: Iterable[str], cap: int = 4096) -> Lang:
    """Complement w.r.t. words over `alphabet` (not the language's own
    alphabet: symbols the language never mentions must be accepted here).
    Full subset construction with flipped acceptance; states are subsets."""
    alphabet = sorted(set(alphabet) | set(lang.alphabet))
    init = frozenset(lang.initial)
    states = {init}
    delta: dict = {}
    queue = [init]
    while queue:
        s = queue.pop()
        for sym in alphabet:
            t = lang.move(s, sym)
            delta[(s, sym)] = frozenset({t})
            if t not in states:
                states.add(t)
                if len(states) > cap:
                    raise ResourceLimitError(
                        f"complementing language {lang.source!r} exceeded "
                        f"the cap of {cap} subsets"
                    )
                queue.append(t)
    finals = frozenset(s for s in states if not (s & lang.finals))
    return Lang(
        states=tuple(sorted(states, key=repr)),
        initial=frozenset({init}),
        finals=finals,
        delta=delta,
        alphabet=frozenset(alphabet),
        source=f"complement({lang.source})",
    )


# ---------------------------------------------------------------------------
# regex parsing (whitespace-free; `eps` is a keyword, maximal munch)

_SPECIAL = set("|*()")


def _parse_regex(text: str):
    pos = 0

    def peek():
        return text[pos] if pos < len(text) else None

    def parse_alt():
        nonlocal pos
        node = parse_cat()
        while peek() == "|":
            pos += 1
            node = ("alt", node, parse_cat())
        return node

    def parse_cat():
        nonlocal pos
        parts = []
        while True:
            c = peek()
            if c is None or c in "|)":
                break
            parts.append(parse_rep())
        if not parts:
            raise ParseError(f"empty branch in regex {text!r} at position {pos}")
        node = parts[0]
        for p in parts[1:]:
            node = ("cat", node, p)
        return node

    def parse_rep():
        nonlocal pos
        node = parse_atom()
        while peek() == "*":
            pos += 1
            node = ("star", node)
        return node

    def parse_atom():
        nonlocal pos
        c = peek()
        if c == "(":
            pos += 1
            node = parse_alt()
            if peek() != ")":
                raise ParseError(f"unbalanced parenthesis in regex {text!r}")
            pos += 1
            return node
        if text.startswith("eps", pos):
            pos += 3
            return ("eps",)
        if c is None or c in _SPECIAL:
            raise ParseError(f"unexpected {c!r} in regex {text!r} at position {pos}")
        pos += 1
        return ("lit", c)

    node = parse_alt()
    if pos != len(text):
        raise ParseError(f"trailing {text[pos:]!r} in regex {text!r}")
    return node


def _glushkov(ast) -> Lang:
    # Number the literal positions, then compute nullable/first/last/follow.
    positions = []  # index -> symbol

    def number(n):
        if n[0] == "lit":
            positions.append(n[1])
            return ("lit", n[1], len(positions))
        if n[0] == "eps":
            return n
        if n[0] == "star":
            return ("star", number(n[1]))
        return (n[0], number(n[1]), number(n[2]))

    ast = number(ast)
    follow: dict = {i: set() for i in range(1, len(positions) + 1)}

    def analyse(n):
        """returns (nullable, first, last)"""
        if n[0] == "eps":
            return True, set(), set()
        if n[0] == "lit":
            return False, {n[2]}, {n[2]}
        if n[0] == "star":
            _, f, l = analyse(n[1])
            for p in l:
                follow[p] |= f
            return True, f, l
        n1, f1, l1 = analyse(n[1])
        n2, f2, l2 = analyse(n[2])
        if n[0] == "alt":
            return n1 or n2, f1 | f2, l1 | l2
        # cat
        for p in l1:
            follow[p] |= f2
        first = f1 | f2 if n1 else f1
        last = l2 | l1 if n2 else l2
        return n1 and n2, first, last

    nullable, first, last = analyse(ast)
    delta: dict = {}
    for p in first:
        delta.setdefault((0, positions[p - 1]), set()).add(p)
    for p, succs in follow.items():
        for q in succs:
            delta.setdefault((p, positions[q - 1]), set()).add(q)
    finals = set(last)
    if nullable:
        finals.add(0)
    return Lang(
        states=tuple(range(len(positions) + 1)),
        initial=frozenset({0}),
        finals=frozenset(finals),
        delta={k: frozenset(v) for k, v in delta.items()},
        alphabet=frozenset(positions),
    )


def from_regex(text: str) -> Lang:
    lang = _glushkov(_parse_regex(text))
    return Lang(lang.states, lang.initial, lang.finals, lang.delta,
                lang.alphabet, source=text)


# ---------------------------------------------------------------------------
# @file loading: language of an automaton file, ε-transitions eliminated


def from_automaton(a) -> Lang:
    """Language of erased accepted words of an automaton (outputs ignored)."""
    from .automata import EPSILON  # local import to avoid a cycle

    eps_succ: dict = {q: set() for q in a.states}
    sym_succ: dict = {}
    for t in a.transitions:
        if t.label == EPSILON:
            eps_succ[t.src].add(t.dst)
        else:
            sym_succ.setdefault((t.src, t.label), set()).add(t.dst)

    def closure(qs: Iterable[str]) -> frozenset:
        seen = set(qs)
        stack = list(seen)
        while stack:
            q = stack.pop()
            for r in eps_succ.get(q, ()):
                if r not in seen:
                    seen.add(r)
                    stack.append(r)
        return frozenset(seen)

    delta = {}
    for q in a.states:
        src_cl = closure({q})
        for sym in a.alphabet:
            dsts = set()
            for p in src_cl:
                dsts |= sym_succ.get((p, sym), set())
            if dsts:
                delta[(q, sym)] = closure(dsts)
    finals = frozenset(q for q in a.states if closure({q}) & a.final)
    return Lang(
        states=tuple(a.states),
        initial=closure(a.initial),
        finals=finals,
        delta=delta,
        alphabet=frozenset(a.alphabet),
        source="@automaton",
    )


def compile_language(spec: str, base_dir: Optional[str] = None) -> Lang:
    """`@path` loads an automaton file; anything else parses as a regex."""
    if spec.startswith("@"):
        import os

        from .automata import parse_automaton

        path = spec[1:]
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        with open(path, "r", encoding="utf-8") as fh:
            lang = from_automaton(parse_automaton(fh.read()))
        return Lang(lang.states, lang.initial, lang.finals, lang.delta,
                    lang.alphabet, source=spec)
    return from_regex(spec)
