"""Catalog of classical automata subclasses, decided through forbidden patterns.

Every property here is characterised the same way: membership in the class
is equivalent to the *absence* of a structural pattern, and the pattern is
expressible as a pattern formula.  `check_property` runs the model checker
on the pattern and inverts the verdict, so a found witness doubles as a
certificate that the automaton lies outside the class.

The patterns are the classical ones: cycle patterns for the ambiguity
hierarchy of NFAs, parallel runs with pairwise-distinct outputs for
k-valuedness, the twinning property for determinisability, the fork
property for multi-sequentiality, the branching twinning property of
order k for k-sequentiality, and the three loop patterns (co-terminal,
dumbbell, W) whose joint absence characterises finite-valued word
transducers.

Two caveats are inherited from the path semantics:

* Paths may be empty, so a loop binding ``q -[u]-> q`` is always satisfied
  by the empty path.  Patterns that need a *productive* loop say so
  explicitly (path disequalities, ``!(u in eps)``).
* Sharing an input variable between bindings compares label sequences
  position by position.  On ε-free automata this is plain word equality;
  on automata with ε-transitions the checker warns and the catalog answer
  is only as good as the synchronized reading.

This module also hosts the two formula-level utilities that do not fit the
existential pipeline: `check_universal` instantiates a universal state
prefix by colouring, and `cross_check_formula` builds the shared-output
probe whose rejection over word outputs is the decidability guard.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from .automata import FREE_WORD, INT_SUM, TRIVIAL, Automaton
from .errors import ValidationError
from .logic import (
    And,
    Binding,
    BoolConst,
    ColorAtom,
    FinalAtom,
    InitAtom,
    Not,
    Or,
    PatternFormula,
    StateEqAtom,
    check_fragment,
    conj,
    parse_formula,
)
from .pipeline import CheckResult, check_formula

ALL_KINDS = frozenset({TRIVIAL, FREE_WORD, INT_SUM})
OUTPUT_KINDS = frozenset({FREE_WORD, INT_SUM})

# Branching twinning patterns have 2k(k+1) bindings and a constraint whose
# clause count grows with k!-like speed; beyond this order the formula is
# no longer worth constructing.
K_SEQUENTIAL_CAP = 3


# ---------------------------------------------------------------------------
# pattern texts


def _pairwise(fmt: str, names: List[str]) -> List[str]:
    return [fmt.format(x, y) for x, y in itertools.combinations(names, 2)]


def _exp_ambiguous(k, kind):
    # A useful ε-cycle pumps one word into unboundedly many runs.  Two
    # ε-labelled loop paths that differ force at least one of them to be a
    # real (non-empty) cycle.
    text = (
        "exists p1 : q0 -[ua]-> q1 , "
        "exists p2 : q1 -[u]-> q1 , "
        "exists p2b : q1 -[w]-> q1 , "
        "exists p3 : q1 -[ub]-> q2 . "
        "init(q0) & final(q2) & u in eps & w in eps & p2 != p2b"
    )
    return [("useful-eps-cycle", text)]


def _poly_ambiguous(k, kind):
    # Two distinct loops at one useful state over the same input.
    text = (
        "exists p1 : q0 -[ua]-> q1 , "
        "exists p2 : q1 -[u]-> q1 , "
        "exists p2b : q1 -[u]-> q1 , "
        "exists p3 : q1 -[ub]-> q2 . "
        "init(q0) & final(q2) & p2 != p2b"
    )
    return [("twin-cycles", text)]


def _fin_ambiguous(k, kind):
    # Loop at q1, bridge q1->q2 and loop at q2, all over the same non-empty
    # input: pumping it moves the bridge crossing, one run per repetition.
    text = (
        "exists p1 : q0 -[ua]-> q1 , "
        "exists p2 : q1 -[u]-> q1 , "
        "exists p3 : q1 -[u]-> q2 , "
        "exists p4 : q2 -[u]-> q2 , "
        "exists p5 : q2 -[ub]-> q3 . "
        "init(q0) & final(q3) & q1 != q2 & !(u in eps)"
    )
    return [("cycle-bridge-cycle", text)]


def _k_ambiguous(k, kind):
    n = k + 1
    paths = [f"b{i}" for i in range(1, n + 1)]
    bindings = [f"exists b{i} : s{i} -[u]-> t{i}" for i in range(1, n + 1)]
    cons = (
        [f"init(s{i})" for i in range(1, n + 1)]
        + [f"final(t{i})" for i in range(1, n + 1)]
        + _pairwise("{} != {}", paths)
    )
    return [("parallel-runs", " , ".join(bindings) + " . " + " & ".join(cons))]


def _k_valued(k, kind):
    n = k + 1
    outs = [f"v{i}" for i in range(1, n + 1)]
    bindings = [f"exists b{i} : s{i} -[u|v{i}]-> t{i}" for i in range(1, n + 1)]
    cons = (
        [f"init(s{i})" for i in range(1, n + 1)]
        + [f"final(t{i})" for i in range(1, n + 1)]
        + _pairwise("{} != {}", outs)
    )
    return [("diverging-values", " , ".join(bindings) + " . " + " & ".join(cons))]


def _functional(k, kind):
    return _k_valued(1, kind)


def _determinisable(k, kind):
    # Twinning: two initial runs over the same input reach loops over the
    # same input whose outputs drift apart; both loop states must survive
    # to a final state over a common suffix.
    if kind == FREE_WORD:
        heads = (
            "exists b1 : q1 -[u|v1]-> s1 , exists b2 : q2 -[u|v2]-> s2 , "
        )
        divergence = "sdel(v1, v1l, v2, v2l)"
    else:
        heads = "exists b1 : q1 -[u]-> s1 , exists b2 : q2 -[u]-> s2 , "
        divergence = "v1l != v2l"
    text = (
        heads
        + "exists b1l : s1 -[ul|v1l]-> s1 , exists b2l : s2 -[ul|v2l]-> s2 , "
        + "exists b1e : s1 -[ue]-> r1 , exists b2e : s2 -[ue]-> r2 . "
        + "init(q1) & init(q2) & final(r1) & final(r2) & "
        + divergence
    )
    return [("twinning", text)]


def _multi_sequential(k, kind):
    # Fork: from one state, staying in the u1-loop or branching off to a
    # second state, then pumping u2 at both ends.  The two continuations
    # follow the same input, so divergence is delay divergence between the
    # run that stayed (v1 then v2) and the run that branched (v1p then v2p).
    text = (
        "exists b01 : q0 -[u0]-> q1 , "
        "exists b11 : q1 -[u1|v1]-> q1 , "
        "exists b11b : q1 -[u2|v2]-> q1 , "
        "exists b12 : q1 -[u1|v1p]-> q2 , "
        "exists b22 : q2 -[u2|v2p]-> q2 , "
        "exists b23 : q2 -[u3]-> q3 . "
        "init(q0) & final(q3) & sdel(v1, v2, v1p, v2p)"
    )
    return [("fork", text)]


def _k_sequential(k, kind):
    # Branching twinning of order k: k+1 chains of k loop stations each.
    # For every pair of chains, some station must expose delay divergence
    # while everything read up to it agrees.
    bindings = []
    for j in range(k + 1):
        for i in range(1, k + 1):
            if kind == FREE_WORD:
                bindings.append(
                    f"exists c{i}_{j} : q{i - 1}_{j} -[u{i}_{j}|v{i}_{j}]-> q{i}_{j}"
                )
            else:
                bindings.append(
                    f"exists c{i}_{j} : q{i - 1}_{j} -[u{i}_{j}]-> q{i}_{j}"
                )
            bindings.append(
                f"exists l{i}_{j} : q{i}_{j} -[w{i}_{j}|x{i}_{j}]-> q{i}_{j}"
            )
    cons = [f"init(q0_{j})" for j in range(k + 1)]
    for j, jp in itertools.combinations(range(k + 1), 2):
        branches = []
        for i in range(1, k + 1):
            eqs = []
            for ip in range(1, i + 1):
                eqs.append(f"u{ip}_{j} = u{ip}_{jp}")
                eqs.append(f"w{ip}_{j} = w{ip}_{jp}")
            if kind == FREE_WORD:
                lead_j = ".".join(f"v{t}_{j}" for t in range(1, i + 1))
                lead_jp = ".".join(f"v{t}_{jp}" for t in range(1, i + 1))
                div = f"sdel({lead_j}, x{i}_{j}, {lead_jp}, x{i}_{jp})"
            else:
                div = f"x{i}_{j} != x{i}_{jp}"
            branches.append("(" + " & ".join(eqs + [div]) + ")")
        cons.append("(" + " | ".join(branches) + ")")
    return [("branching-twinning", " , ".join(bindings) + " . " + " & ".join(cons))]


def _finite_valued(k, kind):
    # Finite valuedness fails exactly when one of three loop patterns is
    # present; all three must therefore come back empty.
    # Two circuits around one useful state, same input, different outputs:
    # mixing them freely yields ever more outputs for the pumped word.
    co_terminal = (
        "exists b01 : q0 -[ua]-> q1 , "
        "exists b11 : q1 -[u|v1]-> q1 , "
        "exists b11b : q1 -[u|v2]-> q1 , "
        "exists b13 : q1 -[ub]-> q3 . "
        "init(q0) & final(q3) & v1 != v2"
    )
    dumbbell = (
        "exists b01 : s0 -[ua]-> s1 , "
        "exists b11 : s1 -[u|v1]-> s1 , "
        "exists b12 : s1 -[u|v2]-> s2 , "
        "exists b22 : s2 -[u|v3]-> s2 , "
        "exists b23 : s2 -[ub]-> s3 . "
        "init(s0) & final(s3) & s1 != s2 & v1.v2 != v2.v3"
    )
    # W: two back-connected loop columns around a one-way middle column,
    # all cycling over u1/u2/u3.  Runs on (u1 u2^m u3)^j words may defect
    # from the first column to the last at any round; when the first and
    # middle u2-loops produce outputs of different lengths the defection
    # time shows in the output length, so the word has unboundedly many
    # outputs as j grows.
    w_pattern = (
        "exists w1 : r0 -[za]-> r1 , "
        "exists w2 : r1 -[u1]-> r2 , "
        "exists w3 : r2 -[u2|v1]-> r2 , "
        "exists w4 : r2 -[u3]-> r1 , "
        "exists w5 : r1 -[u1]-> r3 , "
        "exists w6 : r3 -[u2|v2]-> r3 , "
        "exists w7 : r3 -[u3]-> r4 , "
        "exists w8 : r4 -[u1]-> r5 , "
        "exists w9 : r5 -[u2]-> r5 , "
        "exists w10 : r5 -[u3]-> r4 , "
        "exists w11 : r4 -[zb]-> r6 . "
        "init(r0) & final(r6) & len(v1) != len(v2)"
    )
    return [
        ("co-terminal-loops", co_terminal),
        ("dumbbell", dumbbell),
        ("w-pattern", w_pattern),
    ]


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class PropertySpec:
    name: str
    summary: str
    monoids: frozenset
    build: Callable[[Optional[int], str], List[Tuple[str, str]]]
    parametric: bool = False
    k_cap: Optional[int] = None


PROPERTIES: Dict[str, PropertySpec] = {
    s.name: s
    for s in [
        PropertySpec(
            "exponentially-ambiguous",
            "number of accepting runs per word is finite (at most exponential)",
            ALL_KINDS,
            _exp_ambiguous,
        ),
        PropertySpec(
            "polynomially-ambiguous",
            "number of accepting runs grows at most polynomially with word length",
            ALL_KINDS,
            _poly_ambiguous,
        ),
        PropertySpec(
            "finitely-ambiguous",
            "number of accepting runs per word is bounded by a constant",
            ALL_KINDS,
            _fin_ambiguous,
        ),
        PropertySpec(
            "k-ambiguous",
            "every word has at most k accepting runs",
            ALL_KINDS,
            _k_ambiguous,
            parametric=True,
        ),
        PropertySpec(
            "functional",
            "all accepting runs on a word produce the same output",
            OUTPUT_KINDS,
            _functional,
        ),
        PropertySpec(
            "k-valued",
            "every word is given at most k distinct outputs",
            OUTPUT_KINDS,
            _k_valued,
            parametric=True,
        ),
        PropertySpec(
            "determinisable",
            "twinning holds; for functional automata this means an "
            "equivalent input-deterministic one exists",
            OUTPUT_KINDS,
            _determinisable,
        ),
        PropertySpec(
            "k-sequential",
            "union of k input-deterministic automata (branching twinning holds)",
            OUTPUT_KINDS,
            _k_sequential,
            parametric=True,
            k_cap=K_SEQUENTIAL_CAP,
        ),
        PropertySpec(
            "multi-sequential",
            "finite union of input-deterministic transducers (no fork)",
            frozenset({FREE_WORD}),
            _multi_sequential,
        ),
        PropertySpec(
            "finite-valued",
            "k-valued for some k (no co-terminal, dumbbell or W pattern)",
            frozenset({FREE_WORD}),
            _finite_valued,
        ),
    ]
}


def list_properties() -> List[PropertySpec]:
    return [PROPERTIES[n] for n in sorted(PROPERTIES)]


def catalog_formulas(
    name: str, a: Automaton, k: Optional[int] = None
) -> List[Tuple[str, str, PatternFormula]]:
    """Pattern formulas whose satisfaction refutes membership of `a` in the
    class `name`, as (variant, text, formula) triples."""
    spec = PROPERTIES.get(name)
    if spec is None:
        known = ", ".join(sorted(PROPERTIES))
        raise ValidationError(f"unknown property {name!r}; known: {known}")
    if spec.parametric:
        if k is None:
            raise ValidationError(f"property {name!r} takes an order: pass k >= 1")
        if k < 1:
            raise ValidationError(f"property {name!r} needs k >= 1, got {k}")
        if spec.k_cap is not None and k > spec.k_cap:
            raise ValidationError(
                f"property {name!r} is limited to k <= {spec.k_cap}: the pattern "
                f"has 2k(k+1) bindings and its constraint grows much faster"
            )
    elif k is not None:
        raise ValidationError(f"property {name!r} does not take an order k")
    kind = a.monoid.kind
    if kind not in spec.monoids:
        raise ValidationError(
            f"property {name!r} does not apply to {a.kind_name} automata"
        )
    out = []
    for variant, text in spec.build(k, kind):
        out.append((variant, text, parse_formula(text)))
    return out


@dataclass
class PropertyVerdict:
    """Outcome of a class-membership test.

    `status` is "in", "out" or "unknown".  When the automaton is outside
    the class, `variant` names the pattern that was found and `detail`
    carries the checker result with its witness.
    """

    prop: str
    k: Optional[int]
    status: str
    variant: Optional[str]
    detail: Optional[CheckResult]
    runs: Tuple[Tuple[str, CheckResult], ...] = ()


def check_property(a: Automaton, name: str, k: Optional[int] = None, cfg=None) -> PropertyVerdict:
    variants = catalog_formulas(name, a, k)
    runs: List[Tuple[str, CheckResult]] = []
    undecided: Optional[Tuple[str, CheckResult]] = None
    for variant, _text, f in variants:
        res = check_formula(a, f, cfg)
        runs.append((variant, res))
        if res.verdict == "sat":
            return PropertyVerdict(name, k, "out", variant, res, tuple(runs))
        if res.verdict == "unknown" and undecided is None:
            undecided = (variant, res)
    if undecided is not None:
        return PropertyVerdict(name, k, "unknown", undecided[0], undecided[1], tuple(runs))
    return PropertyVerdict(name, k, "in", None, None, tuple(runs))


# ---------------------------------------------------------------------------
# universal state prefixes

# A universal prefix `forall q1 ... qm` is decided by instantiation: for
# every tuple of states we colour the chosen states with fresh marks, turn
# each universal variable into an existential one pinned to its mark, and
# run the existential checker.  The formula holds iff every tuple does.


def _fresh(base: str, used: set) -> str:
    name = base
    while name in used:
        name += "_"
    used.add(name)
    return name


@dataclass
class UniversalVerdict:
    status: str  # "sat" | "unsat" | "unknown"
    failing: Optional[Dict[str, object]]  # universal variable -> state
    tuples_checked: int
    detail: Optional[CheckResult]


def _instantiated(f: PatternFormula, states: tuple, marks: dict, a: Automaton):
    """The existential formula for one tuple of universal-variable values,
    together with the automaton recoloured to mark those values."""
    uni = f.universal
    value = dict(zip(uni, states))

    used = set(uni)
    for b in f.bindings:
        used.update((b.path_var, b.src_var, b.input_var, b.dst_var))
        if b.out_var:
            used.add(b.out_var)

    slotted = {}
    for b in f.bindings:
        for q in (b.src_var, b.dst_var):
            if q in value and q not in slotted:
                slotted[q] = _fresh(f"__uq_{q}", used)

    def state_ref(q):
        # slotted universal variables become ordinary existential ones
        return slotted.get(q, q)

    def rw(node):
        if isinstance(node, Not):
            return Not(rw(node.item))
        if isinstance(node, And):
            return And(tuple(rw(i) for i in node.items))
        if isinstance(node, Or):
            return Or(tuple(rw(i) for i in node.items))
        if isinstance(node, InitAtom):
            if node.var in value and node.var not in slotted:
                return BoolConst(value[node.var] in a.initial)
            return InitAtom(state_ref(node.var))
        if isinstance(node, FinalAtom):
            if node.var in value and node.var not in slotted:
                return BoolConst(value[node.var] in a.final)
            return FinalAtom(state_ref(node.var))
        if isinstance(node, ColorAtom):
            if node.var in value and node.var not in slotted:
                return BoolConst(node.color in a.state_colors(value[node.var]))
            return ColorAtom(state_ref(node.var), node.color)
        if isinstance(node, StateEqAtom):
            q1, q2 = state_ref(node.q1), state_ref(node.q2)
            free1 = node.q1 in value and node.q1 not in slotted
            free2 = node.q2 in value and node.q2 not in slotted
            if free1 and free2:
                return BoolConst(value[node.q1] == value[node.q2])
            if free1:
                return ColorAtom(q2, marks[node.q1])
            if free2:
                return ColorAtom(q1, marks[node.q2])
            return StateEqAtom(q1, q2)
        return node

    bindings = tuple(
        Binding(
            b.path_var,
            state_ref(b.src_var),
            b.input_var,
            b.out_var,
            state_ref(b.dst_var),
        )
        for b in f.bindings
    )
    pins = [ColorAtom(slotted[q], marks[q]) for q in sorted(slotted)]
    constraint = conj([rw(f.constraint)] + pins)

    extra: Dict[object, set] = {}
    for q, s in value.items():
        extra.setdefault(s, set()).add(marks[q])
    return a.with_extra_colors(extra), PatternFormula((), bindings, constraint)


def check_universal(a: Automaton, f: PatternFormula, cfg=None) -> UniversalVerdict:
    """Decide a pattern formula with a universal state prefix.

    Tuples are tried in state order; the first definitely-failing tuple is
    reported.  The verdict is "sat" only when every tuple is satisfied.
    """
    if not f.universal:
        raise ValidationError("formula has no universal prefix; use check_formula")
    taken = {c for q in a.states for c in a.state_colors(q)}
    marks = {}
    for i, q in enumerate(f.universal):
        base = f"__mark{i}"
        while base in taken:
            base += "_"
        taken.add(base)
        marks[q] = base

    undecided: Optional[Tuple[dict, CheckResult]] = None
    checked = 0
    for states in itertools.product(a.states, repeat=len(f.universal)):
        a2, f2 = _instantiated(f, states, marks, a)
        res = check_formula(a2, f2, cfg)
        checked += 1
        if res.verdict == "unsat":
            failing = dict(zip(f.universal, states))
            return UniversalVerdict("unsat", failing, checked, res)
        if res.verdict == "unknown" and undecided is None:
            undecided = (dict(zip(f.universal, states)), res)
    if undecided is not None:
        return UniversalVerdict("unknown", undecided[0], checked, undecided[1])
    return UniversalVerdict("sat", None, checked, None)


# ---------------------------------------------------------------------------
# shared-output cross check


def cross_check_formula(a: Automaton, c1: str = "c1", c2: str = "c2") -> PatternFormula:
    """Probe for a word accepted on both colour sides with the same output.

    `a` must carry colours `c1`/`c2` partitioning its states (typically a
    disjoint union of two automata).  Over integer sums the probe is a
    legal formula; over word outputs the shared output variable is an
    implicit output-equality test and fragment checking rejects it before
    anything is compiled — this rejection is what keeps the word logic
    decidable, since such equalities can encode word-matching problems
    with no algorithm at all.
    """
    for name in (c1, c2):
        if not name.isidentifier():
            raise ValidationError(f"colour {name!r} is not usable in a formula")
    for q in a.states:
        have = {c for c in (c1, c2) if c in a.state_colors(q)}
        if len(have) != 1:
            raise ValidationError(
                f"state {q!r} must carry exactly one of the colours "
                f"{c1!r}/{c2!r}, has {sorted(have)!r}"
            )
    text = (
        "exists p1 : s1 -[u|v]-> t1 , exists p2 : s2 -[u|v]-> t2 . "
        f"init(s1) & init(s2) & final(t1) & final(t2) & "
        f"color(s1, {c1}) & color(t1, {c1}) & color(s2, {c2}) & color(t2, {c2})"
    )
    f = parse_formula(text)
    check_fragment(f, a.monoid, has_epsilon=a.has_epsilon())
    return f


# ---------------------------------------------------------------------------
# delays, for validating twinning-style witnesses


def delay(v1, v2):
    """What remains of two outputs after cancelling their common past:
    for words, the suffix pair after the longest common prefix; for sums,
    the difference (paired with 0)."""
    if isinstance(v1, int) and isinstance(v2, int):
        return (v1 - v2, 0)
    i = 0
    while i < len(v1) and i < len(v2) and v1[i] == v2[i]:
        i += 1
    return (v1[i:], v2[i:])
