"""Finite automata with outputs in a monoid, paths, and the convolution encoding.

An automaton here is an NFA whose transitions each carry a value from an output
monoid: the trivial one-element monoid (plain NFAs), a free word monoid over an
output alphabet (transducers), or (Z, +, 0) (sum-automata).  A path's output is
the monoid sum of its transition values.

Tuples of paths are compared by *convolution*: each path is encoded as the
alternating word  q0 a1 d1 q1 ... an dn qn  over the mixed alphabet
states + input letters + output values, components are overlaid positionally,
and shorter components are padded with a bottom letter.  ε-labelled transitions
are encoded with a distinguished marker letter so the overlay stays aligned on
transition boundaries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, Union

from .errors import ParseError, ResourceLimitError, ValidationError

# The empty-string label stands for ε on transitions; files spell it `eps`.
EPSILON = ""

Value = Union[None, str, int]  # unit | word over Γ | integer, per monoid kind

TRIVIAL = "trivial"
FREE_WORD = "word"
INT_SUM = "sum"

_FILE_KINDS = {"nfa": TRIVIAL, "trans": FREE_WORD, "sum": INT_SUM}
_KIND_NAMES = {v: k for k, v in _FILE_KINDS.items()}


@dataclass(frozen=True)
class OutputMonoid:
    """One of: trivial (NFA), free words over `out_alphabet`, integer sums."""

    kind: str
    out_alphabet: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in (TRIVIAL, FREE_WORD, INT_SUM):
            raise ValidationError(f"unknown monoid kind {self.kind!r}")
        if self.kind == FREE_WORD and not self.out_alphabet:
            raise ValidationError("FreeWord monoid needs a non-empty output alphabet")

    @staticmethod
    def trivial() -> "OutputMonoid":
        return OutputMonoid(TRIVIAL)

    @staticmethod
    def words(alphabet: Iterable[str]) -> "OutputMonoid":
        return OutputMonoid(FREE_WORD, frozenset(alphabet))

    @staticmethod
    def sums() -> "OutputMonoid":
        return OutputMonoid(INT_SUM)

    def zero(self) -> Value:
        if self.kind == TRIVIAL:
            return None
        if self.kind == FREE_WORD:
            return ""
        return 0

    def combine(self, x: Value, y: Value) -> Value:
        if self.kind == TRIVIAL:
            return None
        return x + y  # str concatenation or int addition

    def check_value(self, v: Value) -> None:
        """Raise unless v is a well-formed element of this monoid."""
        if self.kind == TRIVIAL:
            if v is not None:
                raise ValidationError(f"trivial monoid carries no values, got {v!r}")
        elif self.kind == FREE_WORD:
            if not isinstance(v, str):
                raise ValidationError(f"expected an output word, got {v!r}")
            bad = [c for c in v if c not in self.out_alphabet]
            if bad:
                raise ValidationError(f"output symbols {bad} not in the output alphabet")
        else:
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValidationError(f"expected an integer output, got {v!r}")


class Transition(NamedTuple):
    src: str
    label: str  # EPSILON for ε
    out: Value
    dst: str


@dataclass(frozen=True, eq=False)
class Automaton:
    """Immutable automaton with outputs.  Identity semantics (eq=False):
    paths refer to their automaton by reference."""

    monoid: OutputMonoid
    alphabet: frozenset
    states: tuple  # declaration order matters for path enumeration
    initial: frozenset
    final: frozenset
    transitions: tuple  # of Transition; index = identity of the transition
    colors: dict = field(default_factory=dict)  # state -> frozenset of colour names

    def __post_init__(self):
        by_src: dict = {s: [] for s in self.states}
        key_to_index: dict = {}
        for i, t in enumerate(self.transitions):
            if t.src in by_src:
                by_src[t.src].append(i)
            key_to_index[t] = i
        object.__setattr__(self, "_by_src", by_src)
        object.__setattr__(self, "_key_to_index", key_to_index)

    def out_transitions(self, state: str) -> list:
        """Indices of transitions leaving `state`, in declaration order."""
        return self._by_src.get(state, [])

    def transition_index(self, key: Transition) -> Optional[int]:
        return self._key_to_index.get(key)

    def state_colors(self, state: str) -> frozenset:
        return self.colors.get(state, frozenset())

    def has_epsilon(self) -> bool:
        return any(t.label == EPSILON for t in self.transitions)

    def with_extra_colors(self, extra: dict) -> "Automaton":
        """Copy with additional colours (used by the ∀-state checker)."""
        colors = {s: self.state_colors(s) for s in self.states if self.state_colors(s)}
        for s, cs in extra.items():
            colors[s] = colors.get(s, frozenset()) | frozenset(cs)
        return Automaton(self.monoid, self.alphabet, self.states, self.initial,
                         self.final, self.transitions, colors)

    @property
    def kind_name(self) -> str:
        return _KIND_NAMES[self.monoid.kind]


def validate(a: Automaton) -> list:
    """Return a list of diagnostic strings; empty iff the automaton is well formed.

    `initial = ∅` is reported as a warning (the accepted relation is empty) but
    everything else is a hard structural violation.
    """
    diags = []
    states = set(a.states)
    if not a.states:
        diags.append("state set is empty")
    if len(states) != len(a.states):
        diags.append("duplicate state declaration")
    for s in a.initial - states:
        diags.append(f"initial state {s} not declared")
    for s in a.final - states:
        diags.append(f"final state {s} not declared")
    if not a.initial:
        diags.append("warning: no initial state: the set of accepting paths is empty")
    seen = set()
    for t in a.transitions:
        if t.src not in states:
            diags.append(f"transition source {t.src} not declared")
        if t.dst not in states:
            diags.append(f"transition target {t.dst} not declared")
        if t.label != EPSILON and t.label not in a.alphabet:
            diags.append(f"transition label {t.label} not in the input alphabet")
        try:
            a.monoid.check_value(t.out)
        except ValidationError as e:
            diags.append(str(e))
        if t in seen:
            diags.append(f"duplicate transition {t}")
        seen.add(t)
    for s in a.colors:
        if s not in states:
            diags.append(f"coloured state {s} not declared")
    return diags


# ---------------------------------------------------------------------------
# file format


def _split_word(token: str, alphabet: frozenset) -> str:
    """Decode an output word written without separators.

    Single-character alphabets split trivially; otherwise we use longest-match,
    which is unambiguous for every corpus we ship.
    """
    if token == "eps":
        return ""
    if all(len(s) == 1 for s in alphabet):
        return token  # keep as str; validity checked by the monoid
    symbols = sorted(alphabet, key=len, reverse=True)
    out, i = [], 0
    while i < len(token):
        for s in symbols:
            if token.startswith(s, i):
                out.append(s)
                i += len(s)
                break
        else:
            raise ValidationError(f"cannot decode output word {token!r} over {sorted(alphabet)}")
    return "".join(out)


def parse_automaton(text: str) -> Automaton:
    """Parse the line-oriented automaton format.

    ::

        automaton <nfa|trans|sum>
        out-alphabet x y       # trans only
        alphabet a b
        states q0 q1
        initial q0
        final q1
        colors q0 red          # optional, repeatable
        trans q0 a q1          # nfa
        trans q0 a xy q1       # trans (output word, `eps` for ε)
        trans q0 a -2 q1       # sum

    Duplicate transitions with identical label and output merge; parallel edges
    with different outputs are kept distinct.
    """
    kind = None
    out_alphabet: list = []
    alphabet: list = []
    states: list = []
    initial: list = []
    final: list = []
    colors: dict = {}
    raw_trans: list = []  # (lineno, tokens)

    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head, rest = toks[0], toks[1:]
        if head == "automaton":
            if len(rest) != 1 or rest[0] not in _FILE_KINDS:
                raise ParseError("expected `automaton <nfa|trans|sum>`", lineno)
            kind = rest[0]
        elif head == "out-alphabet":
            out_alphabet.extend(rest)
        elif head == "alphabet":
            alphabet.extend(rest)
        elif head == "states":
            states.extend(rest)
        elif head == "initial":
            initial.extend(rest)
        elif head == "final":
            final.extend(rest)
        elif head == "colors":
            if len(rest) < 2:
                raise ParseError("expected `colors <state> <colour...>`", lineno)
            colors.setdefault(rest[0], set()).update(rest[1:])
        elif head == "trans":
            raw_trans.append((lineno, rest))
        else:
            raise ParseError(f"unknown directive {head!r}", lineno)

    if kind is None:
        raise ParseError("missing `automaton <kind>` header")
    if kind == "trans":
        if not out_alphabet:
            raise ParseError("trans automaton needs an `out-alphabet` line")
        monoid = OutputMonoid.words(out_alphabet)
    elif kind == "sum":
        monoid = OutputMonoid.sums()
    else:
        monoid = OutputMonoid.trivial()

    state_set = set(states)
    alpha_set = set(alphabet)

    def check_state(name, lineno):
        if name not in state_set:
            raise ParseError(f"undeclared state {name!r}", lineno)

    def check_label(tok, lineno):
        if tok == "eps":
            return EPSILON
        if tok not in alpha_set:
            raise ParseError(f"undeclared input symbol {tok!r}", lineno)
        return tok

    transitions: list = []
    seen_keys: dict = {}
    for lineno, toks in raw_trans:
        want = 3 if kind == "nfa" else 4
        if len(toks) != want:
            raise ParseError(f"expected {want} tokens after `trans`", lineno)
        src, dst = toks[0], toks[-1]
        check_state(src, lineno)
        check_state(dst, lineno)
        label = check_label(toks[1], lineno)
        if kind == "nfa":
            out: Value = None
        elif kind == "trans":
            out = _split_word(toks[2], monoid.out_alphabet)
            try:
                monoid.check_value(out)
            except ValidationError as e:
                raise ParseError(str(e), lineno) from None
        else:
            try:
                out = int(toks[2])
            except ValueError:
                raise ParseError(
                    f"output value {toks[2]!r} incompatible with monoid `sum`", lineno
                ) from None
        t = Transition(src, label, out, dst)
        if t in seen_keys:
            continue  # exact duplicate: merge
        seen_keys[t] = lineno
        transitions.append(t)

    for s in initial + final + list(colors):
        if s not in state_set:
            raise ParseError(f"undeclared state {s!r}")

    a = Automaton(
        monoid=monoid,
        alphabet=frozenset(alpha_set),
        states=tuple(states),
        initial=frozenset(initial),
        final=frozenset(final),
        transitions=tuple(transitions),
        colors={s: frozenset(cs) for s, cs in colors.items()},
    )
    hard = [d for d in validate(a) if not d.startswith("warning")]
    if hard:
        raise ValidationError("; ".join(hard))
    return a


def render_automaton(a: Automaton) -> str:
    """Inverse of parse_automaton (used by tests and scripts)."""
    lines = [f"automaton {a.kind_name}"]
    if a.monoid.kind == FREE_WORD:
        lines.append("out-alphabet " + " ".join(sorted(a.monoid.out_alphabet)))
    lines.append("alphabet " + " ".join(sorted(a.alphabet)))
    lines.append("states " + " ".join(a.states))
    if a.initial:
        lines.append("initial " + " ".join(sorted(a.initial)))
    if a.final:
        lines.append("final " + " ".join(sorted(a.final)))
    for s in a.states:
        cs = a.state_colors(s)
        if cs:
            lines.append(f"colors {s} " + " ".join(sorted(cs)))
    for t in a.transitions:
        label = t.label if t.label != EPSILON else "eps"
        if a.monoid.kind == TRIVIAL:
            lines.append(f"trans {t.src} {label} {t.dst}")
        elif a.monoid.kind == FREE_WORD:
            out = t.out if t.out else "eps"
            lines.append(f"trans {t.src} {label} {out} {t.dst}")
        else:
            lines.append(f"trans {t.src} {label} {t.out} {t.dst}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=True)
class Path:
    """A path q0 a1 d1 q1 ... an dn qn, stored as a start state plus
    transition indices into its automaton.  Empty paths (n=0) are paths."""

    aut: Automaton = field(compare=False, repr=False)
    start: str
    steps: tuple = ()

    def __post_init__(self):
        cur = self.start
        for i in self.steps:
            t = self.aut.transitions[i]
            if t.src != cur:
                raise ValidationError(f"broken path: step {i} leaves {t.src}, expected {cur}")
            cur = t.dst

    @property
    def size(self) -> int:
        return len(self.steps)

    @property
    def source(self) -> str:
        return self.start

    @property
    def target(self) -> str:
        cur = self.start
        for i in self.steps:
            cur = self.aut.transitions[i].dst
        return cur

    @property
    def label_seq(self) -> tuple:
        """Transition labels in order, ε entries included."""
        return tuple(self.aut.transitions[i].label for i in self.steps)

    @property
    def input_word(self) -> tuple:
        """in(π): the label sequence with ε erased."""
        return tuple(l for l in self.label_seq if l != EPSILON)

    @property
    def out_value(self) -> Value:
        m = self.aut.monoid
        v = m.zero()
        for i in self.steps:
            v = m.combine(v, self.aut.transitions[i].out)
        return v

    def endpoint(self, side: str) -> str:
        return self.source if side == "src" else self.target

    def __repr__(self):
        parts = [self.start]
        for i in self.steps:
            t = self.aut.transitions[i]
            lab = t.label if t.label != EPSILON else "ε"
            parts.append(f"-{lab}|{t.out}->{t.dst}" if t.out is not None else f"-{lab}->{t.dst}")
        return "Path(" + "".join(parts) + ")"


DEFAULT_PATH_CAP = 500_000


def paths_upto(a: Automaton, max_transitions: int, cap: int = DEFAULT_PATH_CAP) -> list:
    """All paths with at most `max_transitions` transitions, every state's empty
    path included, in pre-order: states in declaration order, extensions in
    transition declaration order.  Deterministic; guarded by `cap`.
    """
    if max_transitions < 0:
        raise ValueError("max_transitions must be >= 0")
    out: list = []

    def extend(start: str, steps: list, at: str):
        out.append(Path(a, start, tuple(steps)))
        if len(out) > cap:
            raise ResourceLimitError(f"path enumeration exceeded cap of {cap}")
        if len(steps) < max_transitions:
            for i in a.out_transitions(at):
                steps.append(i)
                extend(start, steps, a.transitions[i].dst)
                steps.pop()

    for q in a.states:
        extend(q, [], q)
    return out


def eval_relation(a: Automaton, word: Sequence[str], max_transitions: int,
                  cap: int = DEFAULT_PATH_CAP) -> set:
    """Bounded fragment of the relation R(A): output values of accepting paths
    whose erased input equals `word`, with at most `max_transitions` steps."""
    word = tuple(word)
    vals = set()
    for p in paths_upto(a, max_transitions, cap=cap):
        if (p.source in a.initial and p.target in a.final
                and p.input_word == word):
            vals.add(p.out_value)
    return vals


# ---------------------------------------------------------------------------
# convolution

BOT = ("pad", None)


def state_letter(q: str) -> tuple:
    return ("st", q)


def input_letter(label: str) -> tuple:
    return ("in", label)  # ("in", EPSILON) is the ε̂ marker


def value_letter(v: Value) -> tuple:
    return ("out", v)


def is_state_letter(x) -> bool:
    return x[0] == "st"


def is_input_letter(x) -> bool:
    return x[0] == "in"


def is_value_letter(x) -> bool:
    return x[0] == "out"


def encode_path(p: Path) -> list:
    """q0 a1 d1 q1 ... as a list of letters; length 3n+1."""
    out = [state_letter(p.start)]
    for i in p.steps:
        t = p.aut.transitions[i]
        out.append(input_letter(t.label))
        out.append(value_letter(t.out))
        out.append(state_letter(t.dst))
    return out


@dataclass(frozen=True)
class ConvWord:
    """A word over Σⁿ: position-major tuple of n-component letters."""

    arity: int
    letters: tuple  # tuple of positions; each position is an n-tuple of letters

    def component(self, i: int) -> list:
        """Component i with the ⊥ padding stripped."""
        col = [pos[i] for pos in self.letters]
        while col and col[-1] == BOT:
            col.pop()
        return col

    def __len__(self):
        return len(self.letters)


def convolve(paths: Sequence[Path]) -> ConvWord:
    """Overlay the encodings of the given paths, padding with ⊥."""
    if not paths:
        raise ValueError("convolve needs at least one path")
    enc = [encode_path(p) for p in paths]
    m = max(len(e) for e in enc)
    letters = tuple(
        tuple(e[pos] if pos < len(e) else BOT for e in enc) for pos in range(m)
    )
    return ConvWord(arity=len(paths), letters=letters)


def deconvolve(w: ConvWord, a: Automaton) -> list:
    """Inverse of convolve against a concrete automaton.

    Rejects malformed components: ⊥ before a non-⊥ letter, broken chaining,
    letter sequences that are not state (input value state)*, or transitions
    that do not exist in `a`.
    """
    paths = []
    for i in range(w.arity):
        col = [pos[i] for pos in w.letters]
        # ⊥ must be a suffix
        body_len = len(col)
        while body_len and col[body_len - 1] == BOT:
            body_len -= 1
        body = col[:body_len]
        if any(x == BOT for x in body):
            raise ValidationError(f"component {i}: ⊥ interleaved with path letters")
        if not body or len(body) % 3 != 1:
            raise ValidationError(f"component {i}: encoded length {len(body)} is not 3n+1")
        if not is_state_letter(body[0]):
            raise ValidationError(f"component {i}: does not start with a state letter")
        start = body[0][1]
        steps = []
        cur = start
        for k in range(1, len(body), 3):
            lab, val, st = body[k], body[k + 1], body[k + 2]
            if not (is_input_letter(lab) and is_value_letter(val) and is_state_letter(st)):
                raise ValidationError(f"component {i}: malformed letter triple at {k}")
            t = Transition(cur, lab[1], val[1], st[1])
            idx = a.transition_index(t)
            if idx is None:
                raise ValidationError(f"component {i}: no transition {t} in the automaton")
            steps.append(idx)
            cur = st[1]
        paths.append(Path(a, start, tuple(steps)))
    return paths


def letter_repr(x) -> str:
    if x == BOT:
        return "⊥"
    tag, payload = x
    if tag == "st":
        return str(payload)
    if tag == "in":
        return "ε̂" if payload == EPSILON else str(payload)
    return repr(payload)
