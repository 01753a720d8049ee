"""End-to-end decision pipeline for existential pattern formulas.

parse -> fragment check -> path-formula translation -> negation normal form
-> disjunctive clauses -> one acceptor product per clause -> emptiness.
Clauses are decided in order and the first satisfiable one wins; its witness
is decoded back to paths and re-verified against the direct semantics before
being reported.

Clauses over many path variables are factored before emptiness: components
coupled by a letter-level atom (prefix, length, path equality, language
membership, or any output comparison) must share one acceptor product, but
components related only through endpoint equalities do not.  We enumerate the
finitely many values of the shared endpoint classes, pin them as membership
checks, and decide each coupled group on its own small product.  The factored
verdict is exact, and a recombined witness still passes through the same
re-verification as the single-product path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from . import logic as L
from .acceptors import (
    EndpointTracker,
    PredicateSpec,
    acceptor_product,
    acceptor_union,
    base_paths,
    build_base_acceptor,
    build_output_membership,
    build_parikh_len_cmp,
    build_parikh_not_prefix,
    build_parikh_word_ne,
    build_parikh_sum_cmp,
)
from .automata import FREE_WORD, INT_SUM, Automaton, ConvWord, deconvolve, validate
from .emptiness import SearchConfig, Verdict, decide, package_witness
from .errors import ValidationError


@dataclass
class CheckResult:
    verdict: str  # "sat" | "unsat" | "unknown"
    fragment: str
    witness: Optional[dict] = None  # original pattern var -> value
    witness_paths: Optional[dict] = None  # original path var -> Path
    witness_word: Optional[object] = None  # ConvWord
    method: Optional[str] = None
    bound_used: Optional[int] = None
    stats: dict = field(default_factory=dict)


def _term_indices(term, ix) -> tuple:
    return tuple(ix[pv] for pv in term)


def _literal_acceptor(lit, a: Automaton, n: int, ix: dict):
    """One clause literal -> one acceptor factor (None when vacuous)."""
    negated = isinstance(lit, L.Not)
    atom = lit.item if negated else lit

    if isinstance(atom, L.PPref):
        spec = PredicateSpec("pref", i=ix[atom.p1], j=ix[atom.p2])
        return build_base_acceptor(spec, negated, a, n)
    if isinstance(atom, L.PLenLe):
        spec = PredicateSpec("lenle", i=ix[atom.p1], j=ix[atom.p2])
        return build_base_acceptor(spec, negated, a, n)
    if isinstance(atom, L.PPathEq):
        spec = PredicateSpec("patheq", i=ix[atom.p1], j=ix[atom.p2])
        return build_base_acceptor(spec, negated, a, n)
    if isinstance(atom, L.PInLang):
        spec = PredicateSpec("inlang", i=ix[atom.p], lang=atom.lang)
        return build_base_acceptor(spec, negated, a, n)
    if isinstance(atom, L.PInit):
        spec = PredicateSpec("init", i=ix[atom.p], side=atom.side)
        return build_base_acceptor(spec, negated, a, n)
    if isinstance(atom, L.PFinal):
        spec = PredicateSpec("final", i=ix[atom.p], side=atom.side)
        return build_base_acceptor(spec, negated, a, n)
    if isinstance(atom, L.PColor):
        spec = PredicateSpec("color", i=ix[atom.p], side=atom.side, color=atom.color)
        return build_base_acceptor(spec, negated, a, n)
    if isinstance(atom, L.PStateEq):
        spec = PredicateSpec("stateeq", i=ix[atom.p1], side=atom.side1,
                             j=ix[atom.p2], side2=atom.side2)
        return build_base_acceptor(spec, negated, a, n)

    # output atoms arrive positive from the normal form
    if negated:
        raise ValidationError(f"negated output atom survived normalisation: {atom!r}")
    if isinstance(atom, L.PNotPrefix):
        return build_parikh_not_prefix(_term_indices(atom.t1, ix),
                                       _term_indices(atom.t2, ix), a, n)
    if isinstance(atom, L.POutInLang):
        return build_output_membership(_term_indices(atom.term, ix), atom.lang,
                                       not atom.positive, a, n)
    if isinstance(atom, L.POutLenLe):
        return build_parikh_len_cmp(_term_indices(atom.t1, ix),
                                    _term_indices(atom.t2, ix), atom.strict, a, n)
    if isinstance(atom, L.PSumCmp):
        return build_parikh_sum_cmp(_term_indices(atom.t1, ix),
                                    _term_indices(atom.t2, ix), atom.rel, a, n)
    if isinstance(atom, L.POutNe):
        t1 = _term_indices(atom.t1, ix)
        t2 = _term_indices(atom.t2, ix)
        if a.monoid.kind == FREE_WORD:
            return build_parikh_word_ne(t1, t2, a, n)
        return build_parikh_sum_cmp(t1, t2, "ne", a, n)
    if isinstance(atom, L.POutEq):
        if a.monoid.kind == INT_SUM:
            return build_parikh_sum_cmp((ix[atom.p1],), (ix[atom.p2],), "eq", a, n)
        return None  # single output value over the trivial monoid: always equal
    raise ValidationError(f"no acceptor construction for {atom!r}")


def clause_acceptor(clause, a: Automaton, n: int, ix: dict):
    factors = [base_paths(a, n)]
    for lit in clause:
        acc = _literal_acceptor(lit, a, n, ix)
        if acc is not None:
            factors.append(acc)
    return acceptor_product(factors)


# ---------------------------------------------------------------------------
# clause factoring


_GAMMA_CAP = 4096  # largest endpoint-class assignment space we enumerate


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        self.add(x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        self.parent[self.find(x)] = self.find(y)


def _letter_comps(atom, ix) -> Optional[set]:
    """Component indices whose letter streams the atom's acceptor reads.
    None for endpoint-only predicates, which never force components into the
    same product."""
    if isinstance(atom, (L.PPref, L.PLenLe, L.PPathEq)):
        return {ix[atom.p1], ix[atom.p2]}
    if isinstance(atom, L.PInLang):
        return {ix[atom.p]}
    if isinstance(atom, (L.PNotPrefix, L.POutLenLe, L.PSumCmp, L.POutNe)):
        return {ix[p] for p in atom.t1} | {ix[p] for p in atom.t2}
    if isinstance(atom, L.POutInLang):
        return {ix[p] for p in atom.term}
    if isinstance(atom, L.POutEq):
        return {ix[atom.p1], ix[atom.p2]}
    if isinstance(atom, (L.PInit, L.PFinal, L.PColor, L.PStateEq)):
        return None
    raise ValidationError(f"no coupling rule for {atom!r}")


@dataclass
class _Group:
    comps: tuple  # original component indices, ascending
    names: tuple  # path variable names in the same order
    lits: list  # literals compiled against the local index
    pins: list  # (class_root, local_comp, side, keep_equal)


@dataclass
class _ClausePlan:
    groups: list
    cut_roots: list  # endpoint-class roots valued by the outer enumeration
    neq_pairs: list  # (root1, root2) that must take distinct values
    false: bool = False  # an endpoint was required to differ from itself


def _factor_clause(clause, a: Automaton, n: int, ix: dict) -> Optional[_ClausePlan]:
    """Split a clause into independently decidable groups, or return None
    when it is one coupled block anyway."""
    comps = _UnionFind(range(n))
    for lit in clause:
        atom = lit.item if isinstance(lit, L.Not) else lit
        cs = _letter_comps(atom, ix)
        if cs:
            first = min(cs)
            for c in cs:
                comps.union(first, c)

    # endpoint-equality classes from the positive state equalities
    eps = _UnionFind([])
    eq_lits, neq_lits, rest = [], [], []
    for lit in clause:
        atom = lit.item if isinstance(lit, L.Not) else lit
        if isinstance(atom, L.PStateEq):
            e1 = (ix[atom.p1], atom.side1)
            e2 = (ix[atom.p2], atom.side2)
            if isinstance(lit, L.Not):
                neq_lits.append((lit, e1, e2))
            else:
                eq_lits.append((lit, e1, e2))
                eps.union(e1, e2)
        else:
            rest.append(lit)

    def groups_of(root) -> set:
        return {comps.find(e[0]) for e in eps.parent if eps.find(e) == root}

    roots = {eps.find(e) for _, e1, e2 in eq_lits for e in (e1, e2)}
    cut = {r for r in roots if len(groups_of(r)) >= 2}

    neq_pairs = []
    kept_neq = []
    for lit, e1, e2 in neq_lits:
        r1, r2 = eps.find(e1), eps.find(e2)
        if r1 == r2:
            return _ClausePlan(groups=[], cut_roots=[], neq_pairs=[], false=True)
        if r1 in cut and r2 in cut:
            neq_pairs.append((r1, r2))
        elif comps.find(e1[0]) == comps.find(e2[0]):
            kept_neq.append(lit)
        else:
            cut.add(r1)
            cut.add(r2)
            neq_pairs.append((r1, r2))

    group_roots = sorted({comps.find(c) for c in range(n)})
    if len(group_roots) == 1 and not cut:
        return None
    if len(a.states) ** len(cut) > _GAMMA_CAP:
        return None

    names = {v: k for k, v in ix.items()}
    by_root = {r: [] for r in group_roots}
    for c in range(n):
        by_root[comps.find(c)].append(c)
    groups = {r: _Group(comps=tuple(sorted(cs)),
                        names=tuple(names[c] for c in sorted(cs)),
                        lits=[], pins=[])
              for r, cs in by_root.items()}

    def local(c: int) -> tuple:
        g = groups[comps.find(c)]
        return g, g.comps.index(c)

    for lit in rest:
        atom = lit.item if isinstance(lit, L.Not) else lit
        cs = _letter_comps(atom, ix)
        if cs is None:
            cs = {ix[atom.p]}  # init / final / color
        g, _ = local(min(cs))
        g.lits.append(lit)
    for lit in kept_neq:
        g, _ = local(ix[lit.item.p1])
        g.lits.append(lit)
    for lit, e1, e2 in eq_lits:
        if eps.find(e1) not in cut:
            g, _ = local(e1[0])
            g.lits.append(lit)

    # canonical cut order and value pins on every class member
    cut_roots = sorted(cut, key=lambda r: min(e for e in eps.parent
                                              if eps.find(e) == r))
    for e in list(eps.parent):
        r = eps.find(e)
        if r in cut:
            g, li = local(e[0])
            g.pins.append((r, li, e[1], True))

    return _ClausePlan(groups=[groups[r] for r in group_roots],
                       cut_roots=cut_roots, neq_pairs=neq_pairs)


_SAT_RANK = {"bounded": 2, "bellman_ford": 1, "bfs": 0}
_UNSAT_RANK = {"bound_complete": 2, "bellman_ford": 1, "bfs_exhausted": 0}


def _pick(methods, rank, default):
    best = default
    for m in methods:
        if m is not None and rank.get(m, -1) > rank.get(best, -1):
            best = m
    return best


def decide_clause(clause, a: Automaton, n: int, ix: dict, cfg: SearchConfig):
    """Decide one clause.  Returns (verdict, paths) where paths is the full
    decoded path tuple on sat and None otherwise."""
    plan = _factor_clause(clause, a, n, ix)
    if plan is None:
        v = decide(clause_acceptor(clause, a, n, ix), cfg)
        if v.status != "sat":
            return v, None
        word = ConvWord(arity=n, letters=tuple(v.letters))
        return v, deconvolve(word, a)
    stats = {"configs": 0, "nodes": 0}
    if plan.false:
        return Verdict("unsat", method="bfs_exhausted", stats=stats), None

    local_ix = [{name: k for k, name in enumerate(g.names)} for g in plan.groups]
    base_factors = []
    for g, lix in zip(plan.groups, local_ix):
        factors = [base_paths(a, len(g.comps))]
        for lit in g.lits:
            acc = _literal_acceptor(lit, a, len(g.comps), lix)
            if acc is not None:
                factors.append(acc)
        base_factors.append(factors)

    memo: dict = {}

    def group_verdict(gi: int, gamma: dict) -> Verdict:
        g = plan.groups[gi]
        pinned = tuple(sorted((li, side, gamma[r], keep)
                              for r, li, side, keep in g.pins))
        key = (gi, pinned)
        v = memo.get(key)
        if v is None:
            extra = [EndpointTracker(li, side, {q}, len(g.comps), not keep)
                     for li, side, q, keep in pinned]
            v = decide(acceptor_product(base_factors[gi] + extra), cfg)
            stats["configs"] += v.stats.get("configs", 0)
            stats["nodes"] += v.stats.get("nodes", 0)
            memo[key] = v
        return v

    saw_unknown = False
    bound_used = None
    unsat_methods = []
    for combo in itertools.product(a.states, repeat=len(plan.cut_roots)):
        gamma = dict(zip(plan.cut_roots, combo))
        if any(gamma[r1] == gamma[r2] for r1, r2 in plan.neq_pairs):
            continue
        verdicts = []
        failed = False
        for gi in range(len(plan.groups)):
            v = group_verdict(gi, gamma)
            verdicts.append(v)
            if v.status == "unsat":
                unsat_methods.append(v.method)
                failed = True
                break
        if failed:
            continue
        if any(v.status == "unknown" for v in verdicts):
            saw_unknown = True
            for v in verdicts:
                if v.status == "unknown" and v.bound_used is not None:
                    bound_used = (v.bound_used if bound_used is None
                                  else max(bound_used, v.bound_used))
            continue
        paths = [None] * n
        for g, v in zip(plan.groups, verdicts):
            word = ConvWord(arity=len(g.comps), letters=tuple(v.letters))
            for c, p in zip(g.comps, deconvolve(word, a)):
                paths[c] = p
        method = _pick([v.method for v in verdicts], _SAT_RANK, "bfs")
        bounds = [v.bound_used for v in verdicts if v.bound_used is not None]
        return Verdict("sat", method=method,
                       bound_used=max(bounds) if bounds else None,
                       stats=stats), paths

    if saw_unknown:
        return Verdict("unknown", bound_used=bound_used, stats=stats), None
    method = _pick(unsat_methods, _UNSAT_RANK, "bfs_exhausted")
    return Verdict("unsat", method=method, stats=stats), None


def check_formula(a: Automaton, f: L.PatternFormula,
                  cfg: Optional[SearchConfig] = None) -> CheckResult:
    """Decide an existential pattern formula against an automaton."""
    if cfg is None:
        cfg = SearchConfig()
    hard = [d for d in validate(a) if not d.startswith("warning")]
    if hard:
        raise ValidationError("; ".join(hard))
    if f.universal:
        raise ValidationError(
            "universal prefix requires the state-universal checker"
        )
    tag = L.check_fragment(f, a.monoid, has_epsilon=a.has_epsilon())

    psi, maps = L.to_path_formula(f)
    psi = L.nnf(psi)
    n = len(maps.path_vars)
    ix = {pv: k for k, pv in enumerate(maps.path_vars)}

    stats = {"clauses_tried": 0, "configurations": 0, "nodes": 0}
    any_unknown = False
    bound_used = None
    methods = []
    for clause in L.dnf_clauses(psi):
        stats["clauses_tried"] += 1
        v, paths = decide_clause(clause, a, n, ix, cfg)
        stats["configurations"] += v.stats.get("configs", 0)
        stats["nodes"] += v.stats.get("nodes", 0)
        if v.status == "sat":
            w = package_witness(paths, a, maps, f)
            return CheckResult(
                verdict="sat", fragment=tag, witness=w.valuation,
                witness_paths=w.paths, witness_word=w.witness,
                method=v.method, bound_used=v.bound_used,
                stats=stats,
            )
        if v.status == "unknown":
            any_unknown = True
            if v.bound_used is not None:
                bound_used = (v.bound_used if bound_used is None
                              else max(bound_used, v.bound_used))
        else:
            methods.append(v.method)

    if any_unknown:
        return CheckResult(verdict="unknown", fragment=tag,
                           bound_used=bound_used, stats=stats)
    if not methods:
        method = "bfs_exhausted"  # constraint was identically false
    elif "bound_complete" in methods:
        method = "bound_complete"
    elif "bellman_ford" in methods:
        method = "bellman_ford"
    else:
        method = "bfs_exhausted"
    return CheckResult(verdict="unsat", fragment=tag, method=method, stats=stats)
