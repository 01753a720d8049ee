"""Tuple acceptors over convolutions of path encodings.

An acceptor here reads joint letters: tuples with one component letter per
path position (a tagged state/input/value letter, or padding once that
component's encoding is exhausted).  Alphabets are never enumerated up front;
the path acceptor generates exactly the joint letters its control state
allows, and every other acceptor acts as a filter (guards, trackers) or as a
counter annotator (the Parikh constructions).

Counters are declared per acceptor as a dimension `d`; edges carry integer
increment vectors, and acceptance couples a control state with a restricted
linear constraint over the final counter values.  Products concatenate
counter blocks; unions share them (runs never leave their branch, so the
other branch's slots stay zero).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iproduct
from typing import Optional

from .automata import (
    BOT,
    EPSILON,
    FREE_WORD,
    INT_SUM,
    Automaton,
    input_letter,
    is_input_letter,
    is_state_letter,
    is_value_letter,
    state_letter,
    value_letter,
)
from .errors import ValidationError
from .regexlang import Lang, complement_lang
from .semantics import word_symbols


# ---------------------------------------------------------------------------
# restricted linear constraints over counter vectors


@dataclass(frozen=True)
class LinAtom:
    """coeffs . counters  rel  const, with rel in le/lt/ge/gt/eq/ne."""

    coeffs: tuple
    rel: str
    const: int = 0


@dataclass(frozen=True)
class CAnd:
    items: tuple


C_TRUE = CAnd(())


def constraint_shift(c, offset: int, total: int):
    """Re-embed a constraint written over a d-slot block into `total` slots
    starting at `offset`."""
    if isinstance(c, LinAtom):
        coeffs = (0,) * offset + c.coeffs
        coeffs = coeffs + (0,) * (total - len(coeffs))
        return LinAtom(coeffs, c.rel, c.const)
    return CAnd(tuple(constraint_shift(i, offset, total) for i in c.items))


def constraint_conj(items):
    flat = []
    for c in items:
        if isinstance(c, CAnd):
            flat.extend(c.items)
        else:
            flat.append(c)
    if len(flat) == 1:
        return flat[0]
    return CAnd(tuple(flat))


def constraint_holds(c, vec) -> bool:
    if isinstance(c, CAnd):
        return all(constraint_holds(i, vec) for i in c.items)
    v = sum(a * x for a, x in zip(c.coeffs, vec))
    return {
        "le": v <= c.const,
        "lt": v < c.const,
        "ge": v >= c.const,
        "gt": v > c.const,
        "eq": v == c.const,
        "ne": v != c.const,
    }[c.rel]


def constraint_atoms(c):
    if isinstance(c, LinAtom):
        yield c
    else:
        for i in c.items:
            yield from constraint_atoms(i)


# ---------------------------------------------------------------------------
# acceptor protocol


class TupleAcceptor:
    """Base class; subclasses set arity and d and implement the run
    relation.  `enumerate_letters` returns None on pure filters."""

    arity: int = 0
    d: int = 0

    def initial_states(self):
        raise NotImplementedError

    def step(self, state, letter):
        """-> list of (next_state, increment vector of length d)"""
        raise NotImplementedError

    def enumerate_letters(self, state):
        return None

    def is_accepting(self, state) -> bool:
        raise NotImplementedError

    def zeta(self, state):
        return C_TRUE


_ZERO0 = ()


# ---------------------------------------------------------------------------
# the path-tuple generator


_DONE = ("done",)
_START = ("s",)


class BasePathsAcceptor(TupleAcceptor):
    """Language: exactly the convolutions of n-tuples of paths of the
    automaton.  Each component walks phases state -> label -> value -> state;
    padding is only reachable at the end and is absorbing."""

    def __init__(self, a: Automaton, n: int):
        if n < 1:
            raise ValidationError("path tuples need at least one component")
        self.a = a
        self.arity = n
        self.d = 0
        # per-phase options, precomputed from the transition table
        start_opts = [(state_letter(q), ("at", q)) for q in a.states]
        self._opts = {_START: start_opts, _DONE: [(BOT, _DONE)]}
        by_label: dict = {}
        by_out: dict = {}
        dests: dict = {}
        for t in a.transitions:
            by_label.setdefault(t.src, {}).setdefault(t.label, None)
            by_out.setdefault((t.src, t.label), {}).setdefault(t.out, None)
            dests.setdefault((t.src, t.label, t.out), {}).setdefault(t.dst, None)
        for q in a.states:
            opts = [(BOT, _DONE)]
            for lab in by_label.get(q, ()):
                opts.append((input_letter(lab), ("lab", q, lab)))
            self._opts[("at", q)] = opts
        for (q, lab), outs in by_out.items():
            self._opts[("lab", q, lab)] = [
                (value_letter(o), ("val", q, lab, o)) for o in outs
            ]
        for (q, lab, o), ds in dests.items():
            self._opts[("val", q, lab, o)] = [
                (state_letter(r), ("at", r)) for r in ds
            ]

    def initial_states(self):
        return [tuple(_START for _ in range(self.arity))]

    def enumerate_letters(self, state):
        per_comp = [[sig for sig, _ in self._opts[ph]] for ph in state]
        for combo in iproduct(*per_comp):
            if all(c == BOT for c in combo):
                continue  # never pad past the longest component
            yield combo

    def step(self, state, letter):
        nxt = []
        for ph, sig in zip(state, letter):
            for osig, onxt in self._opts[ph]:
                if osig == sig:
                    nxt.append(onxt)
                    break
            else:
                return []
        return [(tuple(nxt), _ZERO0)]

    def is_accepting(self, state) -> bool:
        return all(ph == _DONE or ph[0] == "at" for ph in state)


def base_paths(a: Automaton, n: int) -> BasePathsAcceptor:
    return BasePathsAcceptor(a, n)


# ---------------------------------------------------------------------------
# base predicate acceptors (guards and endpoint trackers)


@dataclass(frozen=True)
class PredicateSpec:
    """One basic predicate over tuple components.

    kind: pref | lenle | patheq | inlang | init | final | color | stateeq
    i, j: component indices (j unused where inapplicable)
    side / side2: "src" or "dst" endpoint selectors
    lang: input language for inlang; color: colour name for color
    """

    kind: str
    i: int = 0
    j: int = 0
    side: str = "src"
    side2: str = "src"
    lang: Optional[Lang] = None
    color: Optional[str] = None


class _GuardAcceptor(TupleAcceptor):
    """Positive form: a single state that filters every letter through a
    condition.  Negated form: accept once some letter violated it."""

    def __init__(self, n: int, negated: bool):
        self.arity = n
        self.d = 0
        self.negated = negated

    def _ok(self, letter) -> bool:
        raise NotImplementedError

    def initial_states(self):
        return ["watch"] if self.negated else ["ok"]

    def step(self, state, letter):
        if not self.negated:
            return [(state, _ZERO0)] if self._ok(letter) else []
        if state == "bad" or not self._ok(letter):
            return [("bad", _ZERO0)]
        return [("watch", _ZERO0)]

    def is_accepting(self, state) -> bool:
        return state == "bad" if self.negated else True


class PrefixGuard(_GuardAcceptor):
    """Label sequence of component i is a prefix of component j's, compared
    position by position (ε positions included)."""

    def __init__(self, i, j, n, negated):
        super().__init__(n, negated)
        self.i, self.j = i, j

    def _ok(self, letter) -> bool:
        if is_input_letter(letter[self.i]):
            return letter[self.j] == letter[self.i]
        return True


class LenLeGuard(_GuardAcceptor):
    """Component i runs out no later than component j does."""

    def __init__(self, i, j, n, negated):
        super().__init__(n, negated)
        self.i, self.j = i, j

    def _ok(self, letter) -> bool:
        if letter[self.j] == BOT:
            return letter[self.i] == BOT
        return True


class PathEqGuard(_GuardAcceptor):
    def __init__(self, i, j, n, negated):
        super().__init__(n, negated)
        self.i, self.j = i, j

    def _ok(self, letter) -> bool:
        return letter[self.i] == letter[self.j]


class EndpointTracker(TupleAcceptor):
    """Accept iff a chosen endpoint of component i lies in a state set
    (initial states, final states, or a colour class)."""

    def __init__(self, i, side, states, n, negated):
        self.arity = n
        self.d = 0
        self.i, self.side = i, side
        self.states = frozenset(states)
        self.negated = negated

    def initial_states(self):
        return [None]

    def step(self, state, letter):
        sig = letter[self.i]
        if is_state_letter(sig):
            if self.side == "src":
                if state is None:
                    state = sig[1]
            else:
                state = sig[1]
        return [(state, _ZERO0)]

    def is_accepting(self, state) -> bool:
        if state is None:
            return False
        return (state in self.states) != self.negated


class StateEqTracker(TupleAcceptor):
    """Endpoint of component i equals endpoint of component j."""

    def __init__(self, i, side_i, j, side_j, n, negated):
        self.arity = n
        self.d = 0
        self.i, self.side_i = i, side_i
        self.j, self.side_j = j, side_j
        self.negated = negated

    def initial_states(self):
        return [(None, None)]

    def _track(self, cur, comp, side, letter):
        sig = letter[comp]
        if is_state_letter(sig):
            if side == "dst" or cur is None:
                return sig[1]
        return cur

    def step(self, state, letter):
        vi = self._track(state[0], self.i, self.side_i, letter)
        vj = self._track(state[1], self.j, self.side_j, letter)
        return [((vi, vj), _ZERO0)]

    def is_accepting(self, state) -> bool:
        vi, vj = state
        if vi is None or vj is None:
            return False
        return (vi == vj) != self.negated


class LangMembership(TupleAcceptor):
    """Erased input word of component i belongs to a regular language.
    Deterministic subset simulation, so the negated form is exact."""

    def __init__(self, i, lang: Lang, n, negated):
        self.arity = n
        self.d = 0
        self.i = i
        self.lang = lang
        self.negated = negated
        self._initial = frozenset(lang.initial)

    def initial_states(self):
        return [self._initial]

    def step(self, state, letter):
        sig = letter[self.i]
        if is_input_letter(sig) and sig[1] != EPSILON:
            state = self.lang.move(state, sig[1])
        return [(state, _ZERO0)]

    def is_accepting(self, state) -> bool:
        hit = bool(state & frozenset(self.lang.finals))
        return hit != self.negated


class ConstAcceptor(TupleAcceptor):
    def __init__(self, n, value: bool):
        self.arity = n
        self.d = 0
        self.value = value

    def initial_states(self):
        return ["*"]

    def step(self, state, letter):
        return [(state, _ZERO0)]

    def is_accepting(self, state) -> bool:
        return self.value


def build_base_acceptor(spec: PredicateSpec, negated: bool, a: Automaton,
                        n: int) -> TupleAcceptor:
    if spec.kind == "pref":
        return PrefixGuard(spec.i, spec.j, n, negated)
    if spec.kind == "lenle":
        return LenLeGuard(spec.i, spec.j, n, negated)
    if spec.kind == "patheq":
        return PathEqGuard(spec.i, spec.j, n, negated)
    if spec.kind == "inlang":
        return LangMembership(spec.i, spec.lang, n, negated)
    if spec.kind == "init":
        return EndpointTracker(spec.i, spec.side, a.initial, n, negated)
    if spec.kind == "final":
        return EndpointTracker(spec.i, spec.side, a.final, n, negated)
    if spec.kind == "color":
        marked = [q for q in a.states if spec.color in a.state_colors(q)]
        return EndpointTracker(spec.i, spec.side, marked, n, negated)
    if spec.kind == "stateeq":
        return StateEqTracker(spec.i, spec.side, spec.j, spec.side2, n, negated)
    raise ValidationError(f"unknown predicate kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# Parikh acceptors


def _letter_weight(sig, a: Automaton):
    """Weight of a value letter: output length over words, the value itself
    over integers."""
    d = sig[1]
    if a.monoid.kind == FREE_WORD:
        return len(word_symbols(d, a.monoid))
    return d


def _occurrence_counts(term, n) -> list:
    counts = [0] * n
    for idx in term:
        counts[idx] += 1
    return counts


class LenCmpAcceptor(TupleAcceptor):
    """Two counters accumulating the output weights of two terms; accepts
    everything, the comparison lives in the final constraint."""

    def __init__(self, t1, t2, rel, a: Automaton, n: int):
        if rel not in ("le", "lt", "ne"):
            raise ValidationError(f"unsupported length comparison {rel!r}")
        self.arity = n
        self.d = 2
        self.a = a
        self.k1 = _occurrence_counts(t1, n)
        self.k2 = _occurrence_counts(t2, n)
        self.rel = rel

    def initial_states(self):
        return ["*"]

    def step(self, state, letter):
        c1 = c2 = 0
        for j, sig in enumerate(letter):
            if is_value_letter(sig) and (self.k1[j] or self.k2[j]):
                w = _letter_weight(sig, self.a)
                c1 += w * self.k1[j]
                c2 += w * self.k2[j]
        return [(state, (c1, c2))]

    def is_accepting(self, state) -> bool:
        return True

    def zeta(self, state):
        return LinAtom((1, -1), self.rel, 0)


class SumCmpAcceptor(TupleAcceptor):
    """Single difference counter between the integer sums of two terms."""

    def __init__(self, t1, t2, rel, a: Automaton, n: int):
        if rel not in ("le", "lt", "eq", "ne"):
            raise ValidationError(f"unsupported sum comparison {rel!r}")
        self.arity = n
        self.d = 1
        self.a = a
        k1 = _occurrence_counts(t1, n)
        k2 = _occurrence_counts(t2, n)
        self.kd = [x - y for x, y in zip(k1, k2)]
        self.rel = rel

    def initial_states(self):
        return ["*"]

    def step(self, state, letter):
        c = 0
        for j, sig in enumerate(letter):
            if is_value_letter(sig) and self.kd[j]:
                c += _letter_weight(sig, self.a) * self.kd[j]
        return [(state, (c,))]

    def is_accepting(self, state) -> bool:
        return True

    def zeta(self, state):
        return LinAtom((1,), self.rel, 0)


class OutMembershipAcceptor(TupleAcceptor):
    """Concatenated outputs of a term belong to a regular language.

    One language run per occurrence, with the starting state of each
    occurrence guessed up front and the chaining (end of occurrence o is the
    start of occurrence o+1) checked at acceptance.  Negation goes through
    the complemented language, built first."""

    def __init__(self, term, lang: Lang, negated, a: Automaton, n: int):
        self.arity = n
        self.d = 0
        self.a = a
        self.term = tuple(term)
        if negated:
            lang = complement_lang(lang, sorted(a.monoid.out_alphabet))
        self.lang = lang
        self._finals = frozenset(self.lang.finals)
        self._initial = frozenset(self.lang.initial)
        m = len(self.term)
        self._by_comp = [[o for o, j in enumerate(self.term) if j == comp]
                         for comp in range(n)]
        self._empty_ok = bool(self._initial & self._finals) if m == 0 else None

    def initial_states(self):
        m = len(self.term)
        if m == 0:
            return [()]
        # (guess, current) per occurrence; the first guess must be initial
        ranges = []
        for o in range(m):
            starts = self._initial if o == 0 else frozenset(self.lang.states)
            ranges.append([(g, g) for g in sorted(starts, key=repr)])
        return [tuple(combo) for combo in iproduct(*ranges)]

    def step(self, state, letter):
        if not self.term:
            return [(state, _ZERO0)]
        nexts = [state]
        for comp, sig in enumerate(letter):
            if not is_value_letter(sig) or not self._by_comp[comp]:
                continue
            word = word_symbols(sig[1], self.a.monoid)
            if not word:
                continue
            grown = []
            for st in nexts:
                per_occ = []
                for o, (g, cur) in enumerate(st):
                    if o in self._by_comp[comp]:
                        reach = {cur}
                        for sym in word:
                            reach = self.lang.move(frozenset(reach), sym)
                            if not reach:
                                break
                        per_occ.append([(g, r) for r in sorted(reach, key=repr)])
                    else:
                        per_occ.append([(g, cur)])
                for combo in iproduct(*per_occ):
                    grown.append(tuple(combo))
            nexts = grown
            if not nexts:
                return []
        return [(st, _ZERO0) for st in nexts]

    def is_accepting(self, state) -> bool:
        if not self.term:
            return self._empty_ok
        for o in range(len(state) - 1):
            if state[o][1] != state[o + 1][0]:
                return False
        return state[0][0] in self._initial and state[-1][1] in self._finals


class MismatchAcceptor(TupleAcceptor):
    """Some position carries different letters in the two concatenated
    output words.  The occurrence holding the mismatch on each side is
    chosen up front; two counters measure the prefix length up to the marked
    letter and must agree at acceptance."""

    def __init__(self, t1, t2, a: Automaton, n: int):
        self.arity = n
        self.d = 2
        self.a = a
        self.t1 = tuple(t1)
        self.t2 = tuple(t2)
        # pre1[occ][comp]: occurrences of comp strictly before occ in t1
        self.pre1 = self._prefix_counts(self.t1, n)
        self.pre2 = self._prefix_counts(self.t2, n)

    @staticmethod
    def _prefix_counts(term, n):
        out = []
        counts = [0] * n
        for j in term:
            out.append(tuple(counts))
            counts[j] += 1
        return out

    def initial_states(self):
        states = []
        for oa in range(len(self.t1)):
            for ob in range(len(self.t2)):
                states.append((oa, ob, ("pre",), ("pre",)))
        return states

    def _side_options(self, phase, word):
        """(new phase, extra increment) choices for the side whose marked
        occurrence is streaming `word` (already split into symbols): either
        the mark is further right, or it lands on one of these letters."""
        if phase != ("pre",):
            return [(phase, 0)]
        opts = [(("pre",), len(word))]
        for p, c in enumerate(word):
            opts.append((("got", c), p))
        return opts

    def step(self, state, letter):
        oa, ob, ph1, ph2 = state
        comp_a = self.t1[oa]
        comp_b = self.t2[ob]
        inc1 = inc2 = 0
        opts1 = [(ph1, 0)]
        opts2 = [(ph2, 0)]
        for comp, sig in enumerate(letter):
            if not is_value_letter(sig):
                continue
            w = _letter_weight(sig, self.a)
            inc1 += w * self.pre1[oa][comp]
            inc2 += w * self.pre2[ob][comp]
            word = word_symbols(sig[1], self.a.monoid)
            if comp == comp_a:
                opts1 = self._side_options(ph1, word)
            if comp == comp_b:
                opts2 = self._side_options(ph2, word)
        out = []
        for np1, e1 in opts1:
            for np2, e2 in opts2:
                # agreeing marks can never certify a mismatch; drop them on
                # the spot rather than carrying the dead run along
                if np1[0] == "got" and np2[0] == "got" and np1[1] == np2[1]:
                    continue
                out.append(((oa, ob, np1, np2), (inc1 + e1, inc2 + e2)))
        return out

    def is_accepting(self, state) -> bool:
        _, _, ph1, ph2 = state
        return ph1[0] == "got" and ph2[0] == "got" and ph1[1] != ph2[1]

    def zeta(self, state):
        return LinAtom((1, -1), "eq", 0)


def build_parikh_len_cmp(t1, t2, strict, a: Automaton, n: int) -> TupleAcceptor:
    return LenCmpAcceptor(t1, t2, "lt" if strict else "le", a, n)


def build_parikh_sum_cmp(t1, t2, rel, a: Automaton, n: int) -> TupleAcceptor:
    return SumCmpAcceptor(t1, t2, rel, a, n)


def build_output_membership(term, lang, negated, a: Automaton, n: int) -> TupleAcceptor:
    return OutMembershipAcceptor(term, lang, negated, a, n)


def build_parikh_not_prefix(t1, t2, a: Automaton, n: int) -> TupleAcceptor:
    """t1 not a prefix of t2: either t2 is shorter, or the words disagree
    somewhere in the common range."""
    longer = LenCmpAcceptor(t2, t1, "lt", a, n)
    return acceptor_union(longer, MismatchAcceptor(t1, t2, a, n))


def build_parikh_word_ne(t1, t2, a: Automaton, n: int) -> TupleAcceptor:
    """t1 and t2 denote different words: lengths differ, or some shared
    position does.  One mismatch branch covers both prefix directions."""
    return acceptor_union(LenCmpAcceptor(t1, t2, "ne", a, n),
                          MismatchAcceptor(t1, t2, a, n))


# ---------------------------------------------------------------------------
# product and union


class ProductAcceptor(TupleAcceptor):
    def __init__(self, factors):
        arities = {f.arity for f in factors}
        if len(arities) != 1:
            raise ValidationError("product factors disagree on arity")
        self.factors = list(factors)
        self.arity = arities.pop()
        self.d = sum(f.d for f in factors)
        self._offsets = []
        off = 0
        for f in factors:
            self._offsets.append(off)
            off += f.d

    def initial_states(self):
        return [tuple(c) for c in iproduct(*[f.initial_states() for f in self.factors])]

    def enumerate_letters(self, state):
        for f, s in zip(self.factors, state):
            it = f.enumerate_letters(s)
            if it is not None:
                return it
        return None

    def step(self, state, letter):
        zero = (0,) * self.d
        combos = [(tuple(), zero)]
        for idx, (f, s) in enumerate(zip(self.factors, state)):
            succ = f.step(s, letter)
            if not succ:
                return []
            off = self._offsets[idx]
            grown = []
            for prefix, vec in combos:
                for s2, inc in succ:
                    if f.d:
                        v = list(vec)
                        for k, x in enumerate(inc):
                            v[off + k] = x
                        nv = tuple(v)
                    else:
                        nv = vec
                    grown.append((prefix + (s2,), nv))
            combos = grown
        return [(st, v) for st, v in combos]

    def is_accepting(self, state) -> bool:
        return all(f.is_accepting(s) for f, s in zip(self.factors, state))

    def zeta(self, state):
        parts = []
        for idx, (f, s) in enumerate(zip(self.factors, state)):
            z = f.zeta(s)
            if z != C_TRUE:
                parts.append(constraint_shift(z, self._offsets[idx], self.d))
        if not parts:
            return C_TRUE
        return constraint_conj(parts)


class UnionAcceptor(TupleAcceptor):
    """Disjoint union; branches share counter slots, which is sound because
    a run never changes branch and acceptance reads the branch's own
    constraint."""

    def __init__(self, left: TupleAcceptor, right: TupleAcceptor):
        if left.arity != right.arity:
            raise ValidationError("union branches disagree on arity")
        self.left, self.right = left, right
        self.arity = left.arity
        self.d = max(left.d, right.d)

    def _branch(self, tag):
        return self.left if tag == "L" else self.right

    def _pad(self, vec):
        if len(vec) < self.d:
            return vec + (0,) * (self.d - len(vec))
        return vec

    def initial_states(self):
        return ([("L", s) for s in self.left.initial_states()]
                + [("R", s) for s in self.right.initial_states()])

    def enumerate_letters(self, state):
        return self._branch(state[0]).enumerate_letters(state[1])

    def step(self, state, letter):
        tag, s = state
        return [((tag, s2), self._pad(vec))
                for s2, vec in self._branch(tag).step(s, letter)]

    def is_accepting(self, state) -> bool:
        return self._branch(state[0]).is_accepting(state[1])

    def zeta(self, state):
        z = self._branch(state[0]).zeta(state[1])
        if isinstance(z, LinAtom) and len(z.coeffs) < self.d:
            return constraint_shift(z, 0, self.d)
        if isinstance(z, CAnd) and z.items:
            return CAnd(tuple(constraint_shift(i, 0, self.d) for i in z.items))
        return z


def acceptor_product(factors) -> TupleAcceptor:
    factors = list(factors)
    if len(factors) == 1:
        return factors[0]
    return ProductAcceptor(factors)


def acceptor_union(left, right) -> TupleAcceptor:
    return UnionAcceptor(left, right)


# ---------------------------------------------------------------------------
# direct acceptance (for cross-validating constructions on concrete words)


def accepts(acc: TupleAcceptor, letters) -> bool:
    """Does the acceptor accept this convolution?  Explores all runs over
    the given finite word, tracking exact counter values."""
    confs = {(s, (0,) * acc.d) for s in acc.initial_states()}
    for sig in letters:
        nxt = set()
        for s, vec in confs:
            for s2, inc in acc.step(s, sig):
                if acc.d:
                    nvec = tuple(v + i for v, i in zip(vec, inc))
                else:
                    nvec = vec
                nxt.add((s2, nvec))
        confs = nxt
        if not confs:
            return False
    for s, vec in confs:
        if acc.is_accepting(s) and constraint_holds(acc.zeta(s), vec):
            return True
    return False
