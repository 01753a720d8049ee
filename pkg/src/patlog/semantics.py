"""Direct semantics of pattern and path formulas, by enumeration.

This is the independent evaluator everything else is judged against: it never
builds acceptors, it walks real paths.  `eval_pattern` enumerates valuations
binding-by-binding with candidate indexing (by endpoints, shared label
sequences, shared outputs), evaluates each constraint conjunct as soon as its
variables are bound, and memoizes failed suffixes keyed on the variables the
remaining work can still see.  That keeps the classical patterns (shared-input
loops, twinning shapes) tractable at oracle scale without giving up
exhaustiveness: a returned SAT is definite, a miss means "no witness with
paths this short", never more.

Input comparisons (`pref`, `len<=`, `=`) are position-synchronized: they
compare label sequences with ε kept as a position.  Language membership uses
the erased word.  This mirrors the acceptor constructions exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

from .automata import (
    EPSILON,
    FREE_WORD,
    INT_SUM,
    TRIVIAL,
    Automaton,
    Path,
    paths_upto,
)
from .errors import ValidationError
from . import logic as L


# ---------------------------------------------------------------------------
# term and atom evaluation over concrete values


def term_value(vals, monoid_kind):
    """Combine output values (already looked up) into a term value."""
    if monoid_kind == FREE_WORD:
        return "".join(vals)
    if monoid_kind == INT_SUM:
        return sum(vals)
    return None


def word_symbols(word: str, m) -> tuple:
    """Split an output word into alphabet symbols (longest match for
    multi-symbol alphabets, plain characters otherwise)."""
    if all(len(s) == 1 for s in m.out_alphabet):
        return tuple(word)
    out, i = [], 0
    symbols = sorted(m.out_alphabet, key=len, reverse=True)
    while i < len(word):
        for s in symbols:
            if word.startswith(s, i):
                out.append(s)
                i += len(s)
                break
        else:
            raise ValidationError(f"cannot split output word {word!r}")
    return tuple(out)


def _is_prefix(xs, ys) -> bool:
    return len(xs) <= len(ys) and tuple(ys[: len(xs)]) == tuple(xs)


class _Ctx:
    """Valuation context: states for state vars, label sequences for input
    vars, monoid values for output vars, Paths for path variables."""

    def __init__(self, a: Automaton):
        self.a = a
        self.states: dict = {}
        self.inputs: dict = {}  # var -> label sequence (ε entries kept)
        self.outputs: dict = {}
        self.paths: dict = {}

    def term(self, t: L.Term):
        return term_value([self.outputs[v] for v in t.vars], self.a.monoid.kind)


def _erased(seq) -> tuple:
    return tuple(x for x in seq if x != EPSILON)


def pattern_atom_holds(atom, ctx: _Ctx) -> bool:
    a = ctx.a
    if isinstance(atom, L.PrefAtom):
        return _is_prefix(ctx.inputs[atom.u1], ctx.inputs[atom.u2])
    if isinstance(atom, L.InputInLang):
        return atom.lang.accepts(_erased(ctx.inputs[atom.var]))
    if isinstance(atom, L.LenLeAtom):
        return len(ctx.inputs[atom.u1]) <= len(ctx.inputs[atom.u2])
    if isinstance(atom, L.InitAtom):
        return ctx.states[atom.var] in a.initial
    if isinstance(atom, L.FinalAtom):
        return ctx.states[atom.var] in a.final
    if isinstance(atom, L.StateEqAtom):
        return ctx.states[atom.q1] == ctx.states[atom.q2]
    if isinstance(atom, L.PathEqAtom):
        return ctx.paths[atom.p1] == ctx.paths[atom.p2]
    if isinstance(atom, L.ColorAtom):
        return atom.color in a.state_colors(ctx.states[atom.var])
    if isinstance(atom, L.NotPrefixAtom):
        w1 = word_symbols(ctx.term(atom.t1), a.monoid)
        w2 = word_symbols(ctx.term(atom.t2), a.monoid)
        return not _is_prefix(w1, w2)
    if isinstance(atom, L.OutputInLang):
        member = atom.lang.accepts(word_symbols(ctx.term(atom.term), a.monoid))
        return member if atom.positive else not member
    if isinstance(atom, L.OutLenLeAtom):
        n1 = len(word_symbols(ctx.term(atom.t1), a.monoid))
        n2 = len(word_symbols(ctx.term(atom.t2), a.monoid))
        return n1 < n2 if atom.strict else n1 <= n2
    if isinstance(atom, L.SumCmpAtom):
        x, y = ctx.term(atom.t1), ctx.term(atom.t2)
        if atom.rel == "le":
            return x <= y
        if atom.rel == "lt":
            return x < y
        if atom.rel == "eq":
            return x == y
        return x != y
    if isinstance(atom, L.OutputNeAtom):
        return ctx.term(atom.t1) != ctx.term(atom.t2)
    raise ValidationError(f"cannot evaluate {atom!r}")


def formula_holds(node, ctx: _Ctx) -> bool:
    if isinstance(node, L.Not):
        return not formula_holds(node.item, ctx)
    if isinstance(node, L.And):
        return all(formula_holds(i, ctx) for i in node.items)
    if isinstance(node, L.Or):
        return any(formula_holds(i, ctx) for i in node.items)
    if isinstance(node, L.BoolConst):
        return node.value
    return pattern_atom_holds(node, ctx)


def _bind(ctx: _Ctx, b: L.Binding, path: Path):
    """Bind one binding's variables to a path; returns None on conflict with
    variables already bound, else the list of names newly bound."""
    new = []

    def put(table, name, value):
        if name in table:
            return table[name] == value
        table[name] = value
        new.append((table, name))
        return True

    ok = (
        put(ctx.paths, b.path_var, path)
        and put(ctx.states, b.src_var, path.source)
        and put(ctx.inputs, b.input_var, path.label_seq)
        and (b.out_var is None or put(ctx.outputs, b.out_var, path.out_value))
        and put(ctx.states, b.dst_var, path.target)
    )
    if not ok:
        for table, name in new:
            del table[name]
        return None
    return new


def _unbind(ctx, new):
    for table, name in new:
        del table[name]


def atom_vars(node) -> set:
    """All variable names an atom or boolean subtree reads."""
    if isinstance(node, L.Not):
        return atom_vars(node.item)
    if isinstance(node, (L.And, L.Or)):
        out = set()
        for i in node.items:
            out |= atom_vars(i)
        return out
    if isinstance(node, L.BoolConst):
        return set()
    if isinstance(node, L.PrefAtom):
        return {node.u1, node.u2}
    if isinstance(node, L.InputInLang):
        return {node.var}
    if isinstance(node, L.LenLeAtom):
        return {node.u1, node.u2}
    if isinstance(node, (L.InitAtom, L.FinalAtom)):
        return {node.var}
    if isinstance(node, L.StateEqAtom):
        return {node.q1, node.q2}
    if isinstance(node, L.PathEqAtom):
        return {node.p1, node.p2}
    if isinstance(node, L.ColorAtom):
        return {node.var}
    if isinstance(node, (L.NotPrefixAtom, L.OutLenLeAtom, L.SumCmpAtom, L.OutputNeAtom)):
        return set(node.t1.vars) | set(node.t2.vars)
    if isinstance(node, L.OutputInLang):
        return set(node.term.vars)
    raise ValidationError(f"unknown node {node!r}")


@dataclass
class OracleResult:
    satisfied: bool
    valuation: Optional[dict] = None  # original pattern vars -> values
    paths: Optional[dict] = None  # path var -> Path
    failing_tuple: Optional[tuple] = None  # for universal formulas
    tuples_checked: int = 0
    paths_enumerated: int = 0


class _Search:
    """Backtracking join over one existential body."""

    def __init__(self, a: Automaton, bindings, conjuncts, ctx: _Ctx, all_paths):
        self.a = a
        self.bindings = bindings
        self.ctx = ctx
        self.all_paths = all_paths
        self.indexes: dict = {}

        # Schedule each conjunct at the first binding position where all its
        # variables are bound; variables bound before the search starts
        # (universal states) count as position -1.
        pre_bound = set(ctx.states)
        bound_at: dict = {v: -1 for v in pre_bound}
        for pos, b in enumerate(bindings):
            for v in (b.path_var, b.src_var, b.input_var, b.out_var, b.dst_var):
                if v is not None and v not in bound_at:
                    bound_at[v] = pos
        self.scheduled: list = [[] for _ in bindings]
        self.pre_conjuncts = []
        for c in conjuncts:
            vs = atom_vars(c)
            missing = [v for v in vs if v not in bound_at]
            if missing:
                raise ValidationError(f"unbound variable {missing[0]!r} in constraint")
            pos = max((bound_at[v] for v in vs), default=-1)
            if pos < 0:
                self.pre_conjuncts.append(c)
            else:
                self.scheduled[pos].append(c)

        # Live variables per position: anything a later binding or later
        # conjunct still reads.  They key the failure memo.
        live_after = set()
        self.live: list = [set() for _ in bindings]
        for pos in range(len(bindings) - 1, -1, -1):
            b = bindings[pos]
            for v in (b.path_var, b.src_var, b.input_var, b.out_var, b.dst_var):
                if v is not None:
                    live_after.add(v)
            for c in self.scheduled[pos]:
                live_after |= atom_vars(c)
            self.live[pos] = set(live_after)
        self.memo: set = set()

    def _value_of(self, name):
        ctx = self.ctx
        if name in ctx.paths:
            return ("P", ctx.paths[name])
        if name in ctx.states:
            return ("Q", ctx.states[name])
        if name in ctx.inputs:
            return ("I", ctx.inputs[name])
        if name in ctx.outputs:
            return ("O", ctx.outputs[name])
        return None

    def _memo_key(self, pos):
        vals = []
        for v in sorted(self.live[pos]):
            x = self._value_of(v)
            if x is not None:
                vals.append((v, x))
        return (pos, tuple(vals))

    def _candidates(self, b: L.Binding):
        """Paths matching whatever of the binding's variables is already
        bound, via on-demand indexes."""
        ctx = self.ctx
        key_parts = []
        key_vals = []
        if b.src_var in ctx.states:
            key_parts.append("src")
            key_vals.append(ctx.states[b.src_var])
        if b.dst_var in ctx.states:
            key_parts.append("dst")
            key_vals.append(ctx.states[b.dst_var])
        if b.input_var in ctx.inputs:
            key_parts.append("in")
            key_vals.append(ctx.inputs[b.input_var])
        if b.out_var is not None and b.out_var in ctx.outputs:
            key_parts.append("out")
            key_vals.append(ctx.outputs[b.out_var])
        loop = b.src_var == b.dst_var and b.src_var not in ctx.states
        spec = (tuple(key_parts), loop)
        index = self.indexes.get(spec)
        if index is None:
            index = {}
            for p in self.all_paths:
                if loop and p.source != p.target:
                    continue
                kv = []
                for part in key_parts:
                    if part == "src":
                        kv.append(p.source)
                    elif part == "dst":
                        kv.append(p.target)
                    elif part == "in":
                        kv.append(p.label_seq)
                    else:
                        kv.append(p.out_value)
                index.setdefault(tuple(kv), []).append(p)
            self.indexes[spec] = index
        return index.get(tuple(key_vals), [])

    def run(self) -> bool:
        for c in self.pre_conjuncts:
            if not formula_holds(c, self.ctx):
                return False
        return self._extend(0)

    def _extend(self, pos) -> bool:
        if pos == len(self.bindings):
            return True
        key = self._memo_key(pos)
        if key in self.memo:
            return False
        b = self.bindings[pos]
        for path in self._candidates(b):
            new = _bind(self.ctx, b, path)
            if new is None:
                continue
            if all(formula_holds(c, self.ctx) for c in self.scheduled[pos]):
                if self._extend(pos + 1):
                    return True
            _unbind(self.ctx, new)
        self.memo.add(key)
        return False


def _conjunct_list(constraint):
    if isinstance(constraint, L.And):
        return list(constraint.items)
    return [constraint]


def eval_pattern(f: L.PatternFormula, a: Automaton, max_len: int,
                 path_cap: int = 500_000) -> OracleResult:
    """Brute-force satisfaction over all paths with at most `max_len`
    transitions.  For universal formulas, every state tuple must admit a
    body valuation; the first failing tuple is reported."""
    all_paths = paths_upto(a, max_len, cap=path_cap)
    conjuncts = _conjunct_list(f.constraint)
    tuples_checked = 0
    last_ctx: Optional[_Ctx] = None

    assignments = product(*([a.states] * len(f.universal))) if f.universal else [()]
    for qs in assignments:
        ctx = _Ctx(a)
        for var, state in zip(f.universal, qs):
            ctx.states[var] = state
        search = _Search(a, f.bindings, conjuncts, ctx, all_paths)
        tuples_checked += 1
        if not search.run():
            return OracleResult(
                satisfied=False,
                failing_tuple=tuple(qs) if f.universal else None,
                tuples_checked=tuples_checked,
                paths_enumerated=len(all_paths),
            )
        last_ctx = ctx

    if last_ctx is None:  # universal over an automaton with no states
        return OracleResult(satisfied=True, valuation={}, paths={},
                            paths_enumerated=len(all_paths))

    # satisfied; read the witness of the last tuple checked
    val = {}
    val.update(last_ctx.paths)
    val.update(last_ctx.states)
    val.update({u: _erased(seq) for u, seq in last_ctx.inputs.items()})
    val.update(last_ctx.outputs)
    return OracleResult(
        satisfied=True,
        valuation=val,
        paths=dict(last_ctx.paths),
        tuples_checked=tuples_checked,
        paths_enumerated=len(all_paths),
    )


def satisfies(f: L.PatternFormula, paths: dict, a: Automaton,
              universal_states: Optional[dict] = None) -> bool:
    """Does the given path assignment satisfy the (instantiated) formula?
    Binds every binding's variables from its path, failing on any conflict.
    Used to re-verify decoded witnesses."""
    ctx = _Ctx(a)
    if universal_states:
        ctx.states.update(universal_states)
    for b in f.bindings:
        p = paths.get(b.path_var)
        if p is None:
            return False
        if _bind(ctx, b, p) is None:
            return False
    return formula_holds(f.constraint, ctx)


# ---------------------------------------------------------------------------
# path-formula direct semantics (used to validate the translation and the
# acceptor constructions against something that cannot share their bugs)


def _path_term_word(term, assignment, a) -> tuple:
    syms: list = []
    for pv in term:
        syms.extend(word_symbols(assignment[pv].out_value, a.monoid))
    return tuple(syms)


def _path_term_sum(term, assignment) -> int:
    return sum(assignment[pv].out_value for pv in term)


def path_atom_holds(atom, assignment: dict, a: Automaton) -> bool:
    if isinstance(atom, L.PPref):
        return _is_prefix(assignment[atom.p1].label_seq, assignment[atom.p2].label_seq)
    if isinstance(atom, L.PInLang):
        return atom.lang.accepts(assignment[atom.p].input_word)
    if isinstance(atom, L.PLenLe):
        return assignment[atom.p1].size <= assignment[atom.p2].size
    if isinstance(atom, L.PInit):
        return assignment[atom.p].endpoint(atom.side) in a.initial
    if isinstance(atom, L.PFinal):
        return assignment[atom.p].endpoint(atom.side) in a.final
    if isinstance(atom, L.PStateEq):
        return (assignment[atom.p1].endpoint(atom.side1)
                == assignment[atom.p2].endpoint(atom.side2))
    if isinstance(atom, L.PPathEq):
        return assignment[atom.p1] == assignment[atom.p2]
    if isinstance(atom, L.PColor):
        return atom.color in a.state_colors(assignment[atom.p].endpoint(atom.side))
    if isinstance(atom, L.PNotPrefix):
        w1 = _path_term_word(atom.t1, assignment, a)
        w2 = _path_term_word(atom.t2, assignment, a)
        return not _is_prefix(w1, w2)
    if isinstance(atom, L.POutInLang):
        member = atom.lang.accepts(_path_term_word(atom.term, assignment, a))
        return member if atom.positive else not member
    if isinstance(atom, L.POutLenLe):
        n1 = len(_path_term_word(atom.t1, assignment, a))
        n2 = len(_path_term_word(atom.t2, assignment, a))
        return n1 < n2 if atom.strict else n1 <= n2
    if isinstance(atom, L.PSumCmp):
        x = _path_term_sum(atom.t1, assignment)
        y = _path_term_sum(atom.t2, assignment)
        return {"le": x <= y, "lt": x < y, "eq": x == y, "ne": x != y}[atom.rel]
    if isinstance(atom, L.POutNe):
        if a.monoid.kind == FREE_WORD:
            return (_path_term_word(atom.t1, assignment, a)
                    != _path_term_word(atom.t2, assignment, a))
        return _path_term_sum(atom.t1, assignment) != _path_term_sum(atom.t2, assignment)
    if isinstance(atom, L.POutEq):
        return assignment[atom.p1].out_value == assignment[atom.p2].out_value
    raise ValidationError(f"cannot evaluate path atom {atom!r}")


def path_formula_holds(node, assignment: dict, a: Automaton) -> bool:
    if isinstance(node, L.Not):
        return not path_formula_holds(node.item, assignment, a)
    if isinstance(node, L.And):
        return all(path_formula_holds(i, assignment, a) for i in node.items)
    if isinstance(node, L.Or):
        return any(path_formula_holds(i, assignment, a) for i in node.items)
    if isinstance(node, L.BoolConst):
        return node.value
    return path_atom_holds(node, assignment, a)
