"""Pattern formulas, their concrete syntax, fragment rules, and the
translation to single-sorted path formulas.

A pattern formula binds path variables with typed endpoints::

    [forall q0 .] exists pi1 : p -[u|v]-> q , exists pi2 : p -[u|v2]-> q . C

and constrains them with a boolean combination of atoms over state, input,
output and path variables.  The checker never works on this form directly:
`to_path_formula` rewrites everything into atoms about the paths themselves
(renaming duplicated endpoint/input/output variables and adding the equality
atoms the sharing implied), after `check_fragment` has confirmed the formula
stays inside a decidable fragment for the automaton's output monoid.

Fragment rules, informally:

* no output atoms at all -> PL_NFA, usable with every monoid;
* word outputs: `notpref` (and the `!=`/`mismatch`/`sdel` macros built from
  it) must not occur under an odd number of negations, and no output variable
  may be bound by two bindings — either would smuggle in an output-equality
  test, which makes checking undecidable;
* integer outputs: all comparisons are allowed; formulas whose only output
  atoms are positive `!=` over pairwise-distinct output variables get the
  sharper PL_Sum≠ tag.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterator, Optional, Tuple

from .errors import FragmentError, ParseError, ValidationError
from .regexlang import Lang, compile_language

PL_NFA = "PL_NFA"
PL_TRANS = "PL_Trans"
PL_SUM = "PL_Sum"
PL_SUM_NEQ = "PL_Sum≠"

SRC = "src"
DST = "dst"


class SyncComparisonWarning(UserWarning):
    """Input comparisons (`pref`, `len<=`, shared input variables) are
    position-synchronized; on automata with ε-transitions they compare label
    sequences, not erased words."""


_KEYWORDS = {
    "forall", "exists", "in", "notin", "pref", "notpref", "len",
    "init", "final", "color", "mismatch", "sdel", "eps",
}


# ---------------------------------------------------------------------------
# AST: boolean skeleton (shared by pattern and path levels)


@dataclass(frozen=True)
class Not:
    item: object


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class BoolConst:
    value: bool


TRUE = BoolConst(True)
FALSE = BoolConst(False)


def conj(items) -> object:
    """n-ary conjunction with constant folding and shallow flattening."""
    flat = []
    for i in items:
        if isinstance(i, BoolConst):
            if not i.value:
                return FALSE
            continue
        if isinstance(i, And):
            flat.extend(i.items)
        else:
            flat.append(i)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(items) -> object:
    flat = []
    for i in items:
        if isinstance(i, BoolConst):
            if i.value:
                return TRUE
            continue
        if isinstance(i, Or):
            flat.extend(i.items)
        else:
            flat.append(i)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


# ---------------------------------------------------------------------------
# AST: pattern level


@dataclass(frozen=True)
class Term:
    """An output term: variables combined by `.` (words) or `+` (sums).
    Constants contribute nothing; an empty Term is ε / 0."""

    vars: tuple = ()
    joiner: Optional[str] = None
    kind: Optional[str] = None  # rendering hint when vars is empty


@dataclass(frozen=True)
class Binding:
    path_var: str
    src_var: str
    input_var: str
    out_var: Optional[str]  # None for the NFA form `p -[u]-> q`
    dst_var: str


@dataclass(frozen=True)
class PatternFormula:
    universal: tuple  # universally quantified state variables, possibly ()
    bindings: tuple  # of Binding
    constraint: object


# pattern atoms ---------------------------------------------------------------


@dataclass(frozen=True)
class PrefAtom:  # u1 pref u2
    u1: str
    u2: str


@dataclass(frozen=True)
class InputInLang:  # u in L
    var: str
    lang: Lang


@dataclass(frozen=True)
class LenLeAtom:  # len(u1) <= len(u2)
    u1: str
    u2: str


@dataclass(frozen=True)
class InitAtom:
    var: str


@dataclass(frozen=True)
class FinalAtom:
    var: str


@dataclass(frozen=True)
class StateEqAtom:
    q1: str
    q2: str


@dataclass(frozen=True)
class PathEqAtom:
    p1: str
    p2: str


@dataclass(frozen=True)
class ColorAtom:
    var: str
    color: str


@dataclass(frozen=True)
class NotPrefixAtom:  # t1 notpref t2 (word outputs)
    t1: Term
    t2: Term


@dataclass(frozen=True)
class OutputInLang:  # t in N / t notin N (word outputs)
    term: Term
    lang: Lang
    positive: bool = True


@dataclass(frozen=True)
class OutLenLeAtom:  # len(t1) <= len(t2), strict for <  (word outputs)
    t1: Term
    t2: Term
    strict: bool = False


@dataclass(frozen=True)
class SumCmpAtom:  # t1 <= t2 / t1 < t2  (integer outputs)
    t1: Term
    t2: Term
    rel: str = "le"  # le | lt | eq | ne


@dataclass(frozen=True)
class OutputNeAtom:
    """t1 != t2 — resolved by monoid at compile time: two `notpref` branches
    over words, a native disequality over sums."""

    t1: Term
    t2: Term


_PATTERN_OUTPUT_ATOMS = (NotPrefixAtom, OutputInLang, OutLenLeAtom, SumCmpAtom, OutputNeAtom)
_WORD_ONLY_ATOMS = (NotPrefixAtom, OutputInLang, OutLenLeAtom)


# path-level atoms: terms become tuples of path variables ---------------------


@dataclass(frozen=True)
class PPref:
    p1: str
    p2: str


@dataclass(frozen=True)
class PInLang:
    p: str
    lang: Lang


@dataclass(frozen=True)
class PLenLe:
    p1: str
    p2: str


@dataclass(frozen=True)
class PInit:
    p: str
    side: str  # SRC or DST


@dataclass(frozen=True)
class PFinal:
    p: str
    side: str


@dataclass(frozen=True)
class PStateEq:
    p1: str
    side1: str
    p2: str
    side2: str


@dataclass(frozen=True)
class PPathEq:
    p1: str
    p2: str


@dataclass(frozen=True)
class PColor:
    p: str
    side: str
    color: str


@dataclass(frozen=True)
class PNotPrefix:
    t1: tuple
    t2: tuple


@dataclass(frozen=True)
class POutInLang:
    term: tuple
    lang: Lang
    positive: bool = True


@dataclass(frozen=True)
class POutLenLe:
    t1: tuple
    t2: tuple
    strict: bool = False


@dataclass(frozen=True)
class PSumCmp:
    t1: tuple
    t2: tuple
    rel: str = "le"


@dataclass(frozen=True)
class POutNe:
    t1: tuple
    t2: tuple


@dataclass(frozen=True)
class POutEq:
    """Output equality of two whole paths.  Never written by users: it is the
    atom `to_path_formula` adds when a sum formula binds one output variable
    twice.  Vacuous over the trivial monoid."""

    p1: str
    p2: str


PATH_BASE_ATOMS = (PPref, PInLang, PLenLe, PInit, PFinal, PStateEq, PPathEq, PColor)
PATH_OUTPUT_ATOMS = (PNotPrefix, POutInLang, POutLenLe, PSumCmp, POutNe, POutEq)


@dataclass(frozen=True)
class VarMaps:
    """Bookkeeping from Lemma-style translation: which path variable stands
    for each (possibly renamed) pattern variable, plus the renaming itself."""

    path_vars: tuple
    f_Q: dict  # state var -> (path var, side)
    f_I: dict  # input var -> path var
    f_O: dict  # output var -> path var
    renaming: dict  # fresh name -> original name
    pattern: PatternFormula


# ---------------------------------------------------------------------------
# tokenizer


def _tokenize(text: str):
    toks = []
    i, n = 0, len(text)
    regex_next = False
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if regex_next:
            j, depth = i, 0
            while j < n and not text[j].isspace():
                if text[j] == "(":
                    depth += 1
                elif text[j] == ")":
                    if depth == 0:
                        break
                    depth -= 1
                j += 1
            if j == i:
                raise ParseError("expected a regular expression or @file")
            toks.append(("REGEX", text[i:j]))
            regex_next = False
            i = j
            continue
        if text.startswith("]->", i):
            toks.append(("SYM", "]->"))
            i += 3
            continue
        if text.startswith("-[", i):
            toks.append(("SYM", "-["))
            i += 2
            continue
        if text.startswith("<=", i):
            toks.append(("SYM", "<="))
            i += 2
            continue
        if text.startswith("!=", i):
            toks.append(("SYM", "!="))
            i += 2
            continue
        if c in "(),.:!&|=<+":
            toks.append(("SYM", c))
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(("INT", text[i:j]))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(("ID", word))
            if word in ("in", "notin"):
                regex_next = True
            i = j
            continue
        raise ParseError(f"unexpected character {c!r} in formula")
    return toks


class _TokenStream:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self, k=0):
        j = self.pos + k
        return self.toks[j] if j < len(self.toks) else ("EOF", "")

    def next(self):
        t = self.peek()
        self.pos += 1
        return t

    def expect(self, kind, value=None):
        k, v = self.next()
        if k != kind or (value is not None and v != value):
            want = value if value is not None else kind
            raise ParseError(f"expected {want!r}, found {v!r}")
        return v

    def at_sym(self, s):
        k, v = self.peek()
        return k == "SYM" and v == s

    def at_id(self, name=None):
        k, v = self.peek()
        return k == "ID" and (name is None or v == name)


# ---------------------------------------------------------------------------
# parser


def _ident(ts: _TokenStream, what: str) -> str:
    k, v = ts.next()
    if k != "ID":
        raise ParseError(f"expected {what}, found {v!r}")
    if v in _KEYWORDS:
        raise ParseError(f"{v!r} is a keyword and cannot name a {what}")
    return v


def expand_sdel(t1: Term, t1p: Term, t2: Term, t2p: Term) -> object:
    """Delay-divergence test on two loops: the loop outputs have different
    lengths, or some loop output is non-empty while the lead-in outputs
    already disagree on a letter in both directions."""
    len_neq = disj([
        OutLenLeAtom(t1p, t2p, strict=True),
        OutLenLeAtom(t2p, t1p, strict=True),
    ])
    loops_nonempty = OutLenLeAtom(
        Term((), None, "word"),
        Term(t1p.vars + t2p.vars, t1p.joiner or t2p.joiner or ".", "word"),
        strict=True,
    )
    mismatch = conj([NotPrefixAtom(t1, t2), NotPrefixAtom(t2, t1)])
    return disj([len_neq, conj([loops_nonempty, mismatch])])


class _FormulaParser:
    def __init__(self, text: str, base_dir: Optional[str] = None):
        stripped = " ".join(line.split("#", 1)[0] for line in text.splitlines())
        self.ts = _TokenStream(_tokenize(stripped))
        self.base_dir = base_dir
        self.sorts: dict = {}  # name -> "path" | "state" | "input" | "output"

    def parse(self) -> PatternFormula:
        ts = self.ts
        universal: list = []
        if ts.at_id("forall"):
            ts.next()
            while not ts.at_sym("."):
                universal.append(_ident(ts, "state variable"))
            ts.expect("SYM", ".")
            if not universal:
                raise ParseError("empty forall prefix")
        bindings = [self._binding()]
        while ts.at_sym(","):
            ts.next()
            bindings.append(self._binding())
        self._register_sorts(universal, bindings)
        ts.expect("SYM", ".")
        constraint = self._or()
        if ts.peek()[0] != "EOF":
            raise ParseError(f"trailing input near {ts.peek()[1]!r}")
        return PatternFormula(tuple(universal), tuple(bindings), constraint)

    def _binding(self) -> Binding:
        ts = self.ts
        if not ts.at_id("exists"):
            raise ParseError(f"expected 'exists', found {ts.peek()[1]!r}")
        ts.next()
        pv = _ident(ts, "path variable")
        ts.expect("SYM", ":")
        src = _ident(ts, "state variable")
        ts.expect("SYM", "-[")
        u = _ident(ts, "input variable")
        out = None
        if ts.at_sym("|"):
            ts.next()
            out = _ident(ts, "output variable")
        ts.expect("SYM", "]->")
        dst = _ident(ts, "state variable")
        return Binding(pv, src, u, out, dst)

    def _register_sorts(self, universal, bindings):
        def put(name, sort):
            have = self.sorts.get(name)
            if have is None:
                self.sorts[name] = sort
            elif have != sort:
                raise ParseError(
                    f"variable {name!r} used both as {have} and as {sort}"
                )

        pvs = [b.path_var for b in bindings]
        if len(set(pvs)) != len(pvs):
            raise ParseError("path variables in the prefix must be pairwise distinct")
        for q in universal:
            put(q, "state")
        for b in bindings:
            put(b.path_var, "path")
            put(b.src_var, "state")
            put(b.input_var, "input")
            if b.out_var is not None:
                put(b.out_var, "output")
            put(b.dst_var, "state")

    # constraint grammar: or := and ('|' and)*; and := not ('&' not)*

    def _or(self):
        items = [self._and()]
        while self.ts.at_sym("|"):
            self.ts.next()
            items.append(self._and())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def _and(self):
        items = [self._not()]
        while self.ts.at_sym("&"):
            self.ts.next()
            items.append(self._not())
        return items[0] if len(items) == 1 else And(tuple(items))

    def _not(self):
        ts = self.ts
        if ts.at_sym("!"):
            ts.next()
            return Not(self._not())
        if ts.at_sym("("):
            ts.next()
            node = self._or()
            ts.expect("SYM", ")")
            return node
        return self._atom()

    def _sort_of(self, name: str) -> str:
        sort = self.sorts.get(name)
        if sort is None:
            raise ParseError(f"unbound variable {name!r}")
        return sort

    def _lang(self) -> Lang:
        kind, value = self.ts.next()
        if kind != "REGEX":
            raise ParseError(f"expected a regular expression, found {value!r}")
        return compile_language(value, self.base_dir)

    def _atom(self):
        ts = self.ts
        kind, value = ts.peek()
        if kind == "ID" and value in ("init", "final"):
            ts.next()
            ts.expect("SYM", "(")
            q = _ident(ts, "state variable")
            self._want_sort(q, "state")
            ts.expect("SYM", ")")
            return InitAtom(q) if value == "init" else FinalAtom(q)
        if kind == "ID" and value == "color":
            ts.next()
            ts.expect("SYM", "(")
            q = _ident(ts, "state variable")
            self._want_sort(q, "state")
            ts.expect("SYM", ",")
            colour = _ident(ts, "colour name")
            ts.expect("SYM", ")")
            return ColorAtom(q, colour)
        if kind == "ID" and value == "mismatch":
            ts.next()
            ts.expect("SYM", "(")
            t1 = self._term()
            ts.expect("SYM", ",")
            t2 = self._term()
            ts.expect("SYM", ")")
            return conj([NotPrefixAtom(t1, t2), NotPrefixAtom(t2, t1)])
        if kind == "ID" and value == "sdel":
            ts.next()
            ts.expect("SYM", "(")
            args = [self._term()]
            for _ in range(3):
                ts.expect("SYM", ",")
                args.append(self._term())
            ts.expect("SYM", ")")
            return expand_sdel(*args)
        if kind == "ID" and value == "len":
            return self._len_atom()
        if kind == "ID" and value == "eps" or kind == "INT":
            return self._output_atom(self._term())
        if kind == "ID":
            sort = self._sort_of(value)
            if sort == "state":
                ts.next()
                return self._eq_tail(value, "state")
            if sort == "path":
                ts.next()
                return self._eq_tail(value, "path")
            if sort == "input":
                ts.next()
                return self._input_atom(value)
            return self._output_atom(self._term())
        raise ParseError(f"expected an atom, found {value!r}")

    def _want_sort(self, name, sort):
        if self._sort_of(name) != sort:
            raise ParseError(f"{name!r} is a {self._sort_of(name)} variable, expected {sort}")

    def _eq_tail(self, left, sort):
        ts = self.ts
        if ts.at_sym("="):
            ts.next()
            neg = False
        elif ts.at_sym("!="):
            ts.next()
            neg = True
        else:
            raise ParseError(f"expected '=' or '!=' after {left!r}")
        right = _ident(ts, f"{sort} variable")
        self._want_sort(right, sort)
        atom = StateEqAtom(left, right) if sort == "state" else PathEqAtom(left, right)
        return Not(atom) if neg else atom

    def _input_atom(self, u1):
        ts = self.ts
        if ts.at_id("pref"):
            ts.next()
            u2 = _ident(ts, "input variable")
            self._want_sort(u2, "input")
            return PrefAtom(u1, u2)
        if ts.at_id("in"):
            ts.next()
            return InputInLang(u1, self._lang())
        if ts.at_sym("="):
            ts.next()
            u2 = _ident(ts, "input variable")
            self._want_sort(u2, "input")
            return conj([PrefAtom(u1, u2), PrefAtom(u2, u1)])
        raise ParseError(f"expected 'pref', 'in' or '=' after input variable {u1!r}")

    def _term(self) -> Term:
        ts = self.ts
        vars_: list = []
        joiner = None
        kind = None

        def operand():
            nonlocal kind
            k, v = ts.next()
            if k == "INT":
                if v != "0":
                    raise ParseError(f"only the constant 0 is allowed in terms, found {v!r}")
                kind = kind or "sum"
                return
            if k == "ID" and v == "eps":
                kind = kind or "word"
                return
            if k != "ID":
                raise ParseError(f"expected an output variable, found {v!r}")
            if v in _KEYWORDS:
                raise ParseError(f"{v!r} is a keyword")
            self._want_sort(v, "output")
            vars_.append(v)

        operand()
        while ts.at_sym(".") or ts.at_sym("+"):
            j = ts.next()[1]
            if joiner is not None and joiner != j:
                raise ParseError("cannot mix '.' and '+' in one term")
            joiner = j
            operand()
        return Term(tuple(vars_), joiner, kind)

    def _output_atom(self, t1: Term):
        ts = self.ts
        if ts.at_id("notpref"):
            ts.next()
            return NotPrefixAtom(t1, self._term())
        if ts.at_id("in"):
            ts.next()
            return OutputInLang(t1, self._lang(), positive=True)
        if ts.at_id("notin"):
            ts.next()
            return OutputInLang(t1, self._lang(), positive=False)
        if ts.at_sym("<="):
            ts.next()
            return SumCmpAtom(t1, self._term(), "le")
        if ts.at_sym("<"):
            ts.next()
            return SumCmpAtom(t1, self._term(), "lt")
        if ts.at_sym("="):
            ts.next()
            t2 = self._term()
            return conj([SumCmpAtom(t1, t2, "le"), SumCmpAtom(t2, t1, "le")])
        if ts.at_sym("!="):
            ts.next()
            return OutputNeAtom(t1, self._term())
        raise ParseError(f"expected an output comparison, found {ts.peek()[1]!r}")

    def _len_atom(self):
        ts = self.ts
        ts.expect("ID", "len")
        ts.expect("SYM", "(")
        left_kind, left = self._len_operand()
        ts.expect("SYM", ")")
        if ts.at_sym("<="):
            rel = "le"
        elif ts.at_sym("<"):
            rel = "lt"
        elif ts.at_sym("="):
            rel = "eq"
        elif ts.at_sym("!="):
            rel = "ne"
        else:
            raise ParseError(f"expected a comparison after len(..), found {ts.peek()[1]!r}")
        ts.next()
        ts.expect("ID", "len")
        ts.expect("SYM", "(")
        right_kind, right = self._len_operand()
        ts.expect("SYM", ")")
        if left_kind != right_kind:
            raise ParseError("len() comparison mixes input and output operands")
        if left_kind == "input":
            if rel == "le":
                return LenLeAtom(left, right)
            if rel == "lt":
                return Not(LenLeAtom(right, left))
            if rel == "eq":
                return conj([LenLeAtom(left, right), LenLeAtom(right, left)])
            return disj([Not(LenLeAtom(left, right)), Not(LenLeAtom(right, left))])
        if rel == "le":
            return OutLenLeAtom(left, right)
        if rel == "lt":
            return OutLenLeAtom(left, right, strict=True)
        if rel == "eq":
            return conj([OutLenLeAtom(left, right), OutLenLeAtom(right, left)])
        return disj([OutLenLeAtom(left, right, strict=True),
                     OutLenLeAtom(right, left, strict=True)])

    def _len_operand(self):
        """Either a single input variable or an output term."""
        ts = self.ts
        k, v = ts.peek()
        if k == "ID" and v not in _KEYWORDS and self.sorts.get(v) == "input":
            ts.next()
            return "input", v
        return "output", self._term()


def parse_formula(text: str, base_dir: Optional[str] = None) -> PatternFormula:
    return _FormulaParser(text, base_dir).parse()


# ---------------------------------------------------------------------------
# rendering (inverse of the parser, modulo macro expansion)


def render_term(t: Term) -> str:
    if not t.vars:
        return "0" if t.kind == "sum" else "eps"
    return (t.joiner or ".").join(t.vars) if len(t.vars) > 1 else t.vars[0]


def _render_atom(a) -> str:
    if isinstance(a, PrefAtom):
        return f"{a.u1} pref {a.u2}"
    if isinstance(a, InputInLang):
        return f"{a.var} in {a.lang.source}"
    if isinstance(a, LenLeAtom):
        return f"len({a.u1}) <= len({a.u2})"
    if isinstance(a, InitAtom):
        return f"init({a.var})"
    if isinstance(a, FinalAtom):
        return f"final({a.var})"
    if isinstance(a, StateEqAtom):
        return f"{a.q1} = {a.q2}"
    if isinstance(a, PathEqAtom):
        return f"{a.p1} = {a.p2}"
    if isinstance(a, ColorAtom):
        return f"color({a.var}, {a.color})"
    if isinstance(a, NotPrefixAtom):
        return f"{render_term(a.t1)} notpref {render_term(a.t2)}"
    if isinstance(a, OutputInLang):
        op = "in" if a.positive else "notin"
        return f"{render_term(a.term)} {op} {a.lang.source}"
    if isinstance(a, OutLenLeAtom):
        op = "<" if a.strict else "<="
        return f"len({render_term(a.t1)}) {op} len({render_term(a.t2)})"
    if isinstance(a, SumCmpAtom):
        op = {"le": "<=", "lt": "<", "eq": "=", "ne": "!="}[a.rel]
        return f"{render_term(a.t1)} {op} {render_term(a.t2)}"
    if isinstance(a, OutputNeAtom):
        return f"{render_term(a.t1)} != {render_term(a.t2)}"
    raise ValueError(f"cannot render {a!r}")


def _render_node(n, ctx: int) -> str:
    if isinstance(n, Or):
        s, prec = " | ".join(_render_node(i, 1) for i in n.items), 0
    elif isinstance(n, And):
        s, prec = " & ".join(_render_node(i, 2) for i in n.items), 1
    elif isinstance(n, Not):
        s, prec = "!" + _render_node(n.item, 3), 2
    elif isinstance(n, BoolConst):
        raise ValueError("boolean constants have no concrete syntax")
    else:
        s, prec = _render_atom(n), 3
    return f"({s})" if prec < ctx else s


def render_formula(f: PatternFormula) -> str:
    parts = []
    if f.universal:
        parts.append("forall " + " ".join(f.universal) + " .")
    bs = []
    for b in f.bindings:
        arrow = f"-[{b.input_var}|{b.out_var}]->" if b.out_var else f"-[{b.input_var}]->"
        bs.append(f"exists {b.path_var} : {b.src_var} {arrow} {b.dst_var}")
    parts.append(" , ".join(bs))
    parts.append(".")
    parts.append(_render_node(f.constraint, 0))
    return " ".join(parts)


# ---------------------------------------------------------------------------
# fragment discipline


def _literals(node, neg=False):
    """Yield (atom, under-odd-negation) for every atom occurrence."""
    if isinstance(node, Not):
        yield from _literals(node.item, not neg)
    elif isinstance(node, (And, Or)):
        for i in node.items:
            yield from _literals(i, neg)
    elif isinstance(node, BoolConst):
        return
    else:
        yield node, neg


def _duplicated(names) -> list:
    seen, dups = set(), []
    for n in names:
        if n in seen and n not in dups:
            dups.append(n)
        seen.add(n)
    return dups


def check_fragment(f: PatternFormula, m, *, has_epsilon: bool = False) -> str:
    """Classify `f` under output monoid `m` into the most specific decidable
    fragment, or raise FragmentError naming the violated rule.

    With `has_epsilon` set (the automaton has ε-input transitions), a
    SyncComparisonWarning is emitted whenever the formula relies on
    position-synchronized input comparison.
    """
    from .automata import FREE_WORD, INT_SUM, TRIVIAL  # deferred: cycle

    lits = list(_literals(f.constraint))
    out_lits = [(a, neg) for a, neg in lits if isinstance(a, _PATTERN_OUTPUT_ATOMS)]
    repeated_out = _duplicated([b.out_var for b in f.bindings if b.out_var])
    repeated_in = _duplicated([b.input_var for b in f.bindings])

    if has_epsilon:
        sync = any(isinstance(a, (PrefAtom, LenLeAtom)) for a, _ in lits) or repeated_in
        if sync:
            warnings.warn(
                "the automaton has ε-transitions and the formula compares inputs "
                "position-synchronized; ε is treated as an ordinary position",
                SyncComparisonWarning,
                stacklevel=2,
            )

    def joiners():
        for a, _ in out_lits:
            for t in _atom_terms(a):
                if t.joiner:
                    yield t.joiner

    if m.kind == TRIVIAL:
        if out_lits:
            raise FragmentError(
                "output atoms need word or sum outputs; this automaton has none"
            )
        return PL_NFA

    if m.kind == FREE_WORD:
        if repeated_out:
            raise FragmentError(
                f"output variable {repeated_out[0]!r} is bound by two bindings: "
                "over word outputs this is an implicit output-equality test, "
                "which makes checking undecidable"
            )
        if any(j == "+" for j in joiners()):
            raise FragmentError("'+' joins integer outputs; these outputs are words")
        for a, neg in out_lits:
            if isinstance(a, SumCmpAtom):
                raise FragmentError("ordered comparison applies to integer outputs only")
            if isinstance(a, NotPrefixAtom) and neg:
                raise FragmentError("notpref must not occur under an odd number of negations")
            if isinstance(a, OutputNeAtom) and neg:
                raise FragmentError(
                    "output disequality must not occur under an odd number of negations "
                    "over word outputs"
                )
        if not out_lits:
            return PL_NFA
        return PL_TRANS

    # integer sums
    if any(j == "." for j in joiners()):
        raise FragmentError("'.' concatenates word outputs; these outputs are integers")
    for a, _ in out_lits:
        if isinstance(a, _WORD_ONLY_ATOMS):
            raise FragmentError(
                f"{type(a).__name__} applies to word outputs; these outputs are integers"
            )
    if not out_lits and not repeated_out:
        return PL_NFA
    all_ne_positive = (
        out_lits
        and all(isinstance(a, OutputNeAtom) and not neg for a, neg in out_lits)
        and not repeated_out
    )
    return PL_SUM_NEQ if all_ne_positive else PL_SUM


def _atom_terms(a):
    if isinstance(a, NotPrefixAtom):
        return (a.t1, a.t2)
    if isinstance(a, OutputInLang):
        return (a.term,)
    if isinstance(a, (OutLenLeAtom, SumCmpAtom)):
        return (a.t1, a.t2)
    if isinstance(a, OutputNeAtom):
        return (a.t1, a.t2)
    return ()


# ---------------------------------------------------------------------------
# translation to a path formula


def _fresh(base: str, used: set) -> str:
    k = 2
    while f"{base}__{k}" in used:
        k += 1
    name = f"{base}__{k}"
    used.add(name)
    return name


def to_path_formula(f: PatternFormula) -> Tuple[object, VarMaps]:
    """Rewrite a pattern formula into a formula about its path variables only.

    Duplicated state/input/output variables are renamed apart (the first
    occurrence keeps the name) and the sharing they expressed is re-asserted
    with explicit equality atoms.  Returns the path formula together with the
    variable maps needed to pull a pattern valuation back out of a path
    valuation.
    """
    if f.universal:
        raise ValidationError(
            "universal prefix must be instantiated before translation"
        )
    used = set()
    for b in f.bindings:
        used.update((b.path_var, b.src_var, b.input_var, b.dst_var))
        if b.out_var:
            used.add(b.out_var)

    f_Q: dict = {}
    f_I: dict = {}
    f_O: dict = {}
    renaming: dict = {}
    extra: list = []

    def see_state(name, pv, side):
        if name not in f_Q:
            f_Q[name] = (pv, side)
            return name
        fresh = _fresh(name, used)
        renaming[fresh] = name
        f_Q[fresh] = (pv, side)
        first = f_Q[name]
        extra.append(PStateEq(first[0], first[1], pv, side))
        return fresh

    def see_input(name, pv):
        if name not in f_I:
            f_I[name] = pv
            return name
        fresh = _fresh(name, used)
        renaming[fresh] = name
        f_I[fresh] = pv
        extra.append(PPref(f_I[name], pv))
        extra.append(PPref(pv, f_I[name]))
        return fresh

    def see_output(name, pv):
        if name not in f_O:
            f_O[name] = pv
            return name
        fresh = _fresh(name, used)
        renaming[fresh] = name
        f_O[fresh] = pv
        extra.append(POutEq(f_O[name], pv))
        return fresh

    renamed_bindings = []
    for b in f.bindings:
        src = see_state(b.src_var, b.path_var, SRC)
        u = see_input(b.input_var, b.path_var)
        v = see_output(b.out_var, b.path_var) if b.out_var else None
        dst = see_state(b.dst_var, b.path_var, DST)
        renamed_bindings.append(Binding(b.path_var, src, u, v, dst))

    def term_map(t: Term) -> tuple:
        return tuple(f_O[v] for v in t.vars)

    def tr(node):
        if isinstance(node, Not):
            return Not(tr(node.item))
        if isinstance(node, And):
            return And(tuple(tr(i) for i in node.items))
        if isinstance(node, Or):
            return Or(tuple(tr(i) for i in node.items))
        if isinstance(node, BoolConst):
            return node
        if isinstance(node, PrefAtom):
            return PPref(f_I[node.u1], f_I[node.u2])
        if isinstance(node, InputInLang):
            return PInLang(f_I[node.var], node.lang)
        if isinstance(node, LenLeAtom):
            return PLenLe(f_I[node.u1], f_I[node.u2])
        if isinstance(node, InitAtom):
            pv, side = f_Q[node.var]
            return PInit(pv, side)
        if isinstance(node, FinalAtom):
            pv, side = f_Q[node.var]
            return PFinal(pv, side)
        if isinstance(node, StateEqAtom):
            pv1, s1 = f_Q[node.q1]
            pv2, s2 = f_Q[node.q2]
            return PStateEq(pv1, s1, pv2, s2)
        if isinstance(node, PathEqAtom):
            return PPathEq(node.p1, node.p2)
        if isinstance(node, ColorAtom):
            pv, side = f_Q[node.var]
            return PColor(pv, side, node.color)
        if isinstance(node, NotPrefixAtom):
            return PNotPrefix(term_map(node.t1), term_map(node.t2))
        if isinstance(node, OutputInLang):
            return POutInLang(term_map(node.term), node.lang, node.positive)
        if isinstance(node, OutLenLeAtom):
            return POutLenLe(term_map(node.t1), term_map(node.t2), node.strict)
        if isinstance(node, SumCmpAtom):
            return PSumCmp(term_map(node.t1), term_map(node.t2), node.rel)
        if isinstance(node, OutputNeAtom):
            return POutNe(term_map(node.t1), term_map(node.t2))
        raise ValidationError(f"cannot translate {node!r}")

    psi = conj([tr(f.constraint)] + extra)
    maps = VarMaps(
        path_vars=tuple(b.path_var for b in f.bindings),
        f_Q=f_Q,
        f_I=f_I,
        f_O=f_O,
        renaming=renaming,
        pattern=f,
    )
    return psi, maps


def recover_valuation(pv: dict, maps: VarMaps) -> dict:
    """Pull a valuation of the original pattern variables out of a path
    valuation (path variable -> Path)."""
    nu: dict = {}
    for b in maps.pattern.bindings:
        nu[b.path_var] = pv[b.path_var]
    for q, (p, side) in maps.f_Q.items():
        if q not in maps.renaming:
            nu[q] = pv[p].endpoint(side)
    for u, p in maps.f_I.items():
        if u not in maps.renaming:
            nu[u] = pv[p].input_word
    for v, p in maps.f_O.items():
        if v not in maps.renaming:
            nu[v] = pv[p].out_value
    return nu


# ---------------------------------------------------------------------------
# negation normal form and clause enumeration (path formulas)


def nnf(node):
    if isinstance(node, And):
        return And(tuple(nnf(i) for i in node.items))
    if isinstance(node, Or):
        return Or(tuple(nnf(i) for i in node.items))
    if not isinstance(node, Not):
        return node
    x = node.item
    if isinstance(x, Not):
        return nnf(x.item)
    if isinstance(x, BoolConst):
        return BoolConst(not x.value)
    if isinstance(x, And):
        return Or(tuple(nnf(Not(i)) for i in x.items))
    if isinstance(x, Or):
        return And(tuple(nnf(Not(i)) for i in x.items))
    # atoms
    if isinstance(x, POutLenLe):
        return POutLenLe(x.t2, x.t1, strict=not x.strict)
    if isinstance(x, PSumCmp):
        if x.rel == "le":
            return PSumCmp(x.t2, x.t1, "lt")
        if x.rel == "lt":
            return PSumCmp(x.t2, x.t1, "le")
        if x.rel == "eq":
            return PSumCmp(x.t1, x.t2, "ne")
        return PSumCmp(x.t1, x.t2, "eq")
    if isinstance(x, POutInLang):
        return POutInLang(x.term, x.lang, not x.positive)
    if isinstance(x, POutNe):
        # ¬(t ≠ t') over sums is t = t', i.e. both ≤
        return And((PSumCmp(x.t1, x.t2, "le"), PSumCmp(x.t2, x.t1, "le")))
    if isinstance(x, POutEq):
        return POutNe((x.p1,), (x.p2,))
    if isinstance(x, PNotPrefix):
        raise FragmentError("negated notpref survived fragment checking")
    # base atoms keep their negation; the compiler has exact complements
    return Not(x)


def dnf_clauses(node) -> Iterator[tuple]:
    """Enumerate the conjunctive clauses of an NNF formula, lazily.

    Each clause is a tuple of literals (atom or Not(atom)); the union of the
    clause semantics is the formula's semantics.
    """
    if isinstance(node, BoolConst):
        if node.value:
            yield ()
        return
    if isinstance(node, Or):
        for i in node.items:
            yield from dnf_clauses(i)
        return
    if isinstance(node, And):
        items = node.items

        def rec(idx):
            if idx == len(items):
                yield ()
                return
            for head in dnf_clauses(items[idx]):
                for tail in rec(idx + 1):
                    yield head + tail

        yield from rec(0)
        return
    yield (node,)
