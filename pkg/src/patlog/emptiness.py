"""Emptiness checking for tuple acceptors.

The acceptor is first materialised into a finite control graph (counters
stay symbolic: edges carry increment vectors).  After trimming to states
that can still reach acceptance, the decision strategy is chosen per group
of accepting states sharing a final constraint:

* no counters involved — plain breadth-first reachability, shortest witness;
* a single linear atom other than equality — exact extrema of the scalar
  projection of the counters via iterated relaxation, with ±∞ for pumpable
  cycles; equality needs actual membership of a value, which an interval
  cannot certify, so it is excluded here;
* anything else — a refutation presolve (per-atom intervals, and a residue
  analysis modulo the gcd of cycle weights, both sound for UNSAT only),
  then breadth-first search over exact (state, counter-vector)
  configurations up to a bound.  Exhausting the configuration space is a
  definite no; exhausting only the bound is honestly unknown.

A SAT answer always carries a witness; the caller re-verifies it against
the direct semantics before showing it to anyone.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .acceptors import C_TRUE, CAnd, LinAtom, TupleAcceptor, constraint_atoms, constraint_holds
from .automata import Automaton, ConvWord, convolve, deconvolve
from .errors import ConfigError, ResourceLimitError, ValidationError, WitnessSoundnessError
from .logic import VarMaps, recover_valuation
from . import semantics

NEG_INF = -math.inf
POS_INF = math.inf

BOUND_CAP = 1_000_000


@dataclass
class SearchConfig:
    """Knobs for the emptiness engine.

    bound_policy: "paper_default" derives the bound from the graph size,
    "explicit" uses witness_bound as given, "unbounded_refuse" refuses to
    run the bounded fallback at all (exact strategies only).
    """

    witness_bound: Optional[int] = None
    bound_policy: str = "paper_default"
    memo_cap: int = 500_000
    safety_factor: int = 4

    def __post_init__(self):
        if self.bound_policy not in ("paper_default", "explicit", "unbounded_refuse"):
            raise ConfigError(f"unknown bound policy {self.bound_policy!r}")
        if self.bound_policy == "explicit" and self.witness_bound is None:
            raise ConfigError("explicit bound policy needs witness_bound")
        if self.witness_bound is not None and self.witness_bound < 0:
            raise ConfigError("witness_bound must be non-negative")
        if self.memo_cap < 1:
            raise ConfigError("memo_cap must be positive")
        if self.safety_factor <= 0:
            raise ConfigError("safety_factor must be positive")


@dataclass
class Verdict:
    status: str  # "sat" | "unsat" | "unknown"
    witness: Optional[ConvWord] = None
    valuation: Optional[dict] = None
    paths: Optional[dict] = None
    # sat: bfs | bellman_ford | bounded; unsat: bfs_exhausted | bellman_ford
    # | bound_complete
    method: Optional[str] = None
    bound_used: Optional[int] = None
    stats: dict = field(default_factory=dict)
    letters: Optional[list] = None  # raw accepted joint letters, pre-decode


# ---------------------------------------------------------------------------
# materialisation


@dataclass
class ControlGraph:
    arity: int
    d: int
    nodes: list  # payload control states
    edges: list  # (src, letter, vec, dst) over node indices
    out: list  # node -> list of edge indices
    initial: list
    accepting: dict  # node -> final constraint

    @property
    def ell(self) -> int:
        m = 0
        for _, _, vec, _ in self.edges:
            for x in vec:
                if abs(x) > m:
                    m = abs(x)
        return m

    @property
    def alpha(self) -> int:
        return len({vec for _, _, vec, _ in self.edges if any(vec)})


def materialize(acc: TupleAcceptor, memo_cap: int) -> ControlGraph:
    index: dict = {}
    nodes: list = []
    edges: list = []
    out: list = []

    def intern(state) -> int:
        i = index.get(state)
        if i is None:
            i = len(nodes)
            index[state] = i
            nodes.append(state)
            out.append([])
            if len(nodes) > memo_cap:
                raise ResourceLimitError(
                    f"acceptor control graph exceeded memo cap ({memo_cap} states)"
                )
        return i

    initial = [intern(s) for s in acc.initial_states()]
    queue = deque(initial)
    seen = set(initial)
    while queue:
        i = queue.popleft()
        state = nodes[i]
        letters = acc.enumerate_letters(state)
        if letters is None:
            raise ValidationError("top-level acceptor cannot enumerate letters")
        for sig in letters:
            for nxt, vec in acc.step(state, sig):
                j = intern(nxt)
                edges.append((i, sig, tuple(vec), j))
                out[i].append(len(edges) - 1)
                if j not in seen:
                    seen.add(j)
                    queue.append(j)

    accepting = {}
    for i, state in enumerate(nodes):
        if acc.is_accepting(state):
            accepting[i] = acc.zeta(state)
    return ControlGraph(
        arity=acc.arity, d=acc.d, nodes=nodes, edges=edges, out=out,
        initial=initial, accepting=accepting,
    )


def _coreachable(g: ControlGraph, targets) -> set:
    back: list = [[] for _ in g.nodes]
    for src, _, _, dst in g.edges:
        back[dst].append(src)
    seen = set(targets)
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for u in back[v]:
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return seen


def trim(g: ControlGraph) -> ControlGraph:
    """Drop states that cannot reach any accepting state (everything in the
    graph is already reachable by construction)."""
    if not g.accepting:
        return ControlGraph(g.arity, g.d, [], [], [], [], {})
    keep = _coreachable(g, g.accepting)
    remap = {}
    nodes = []
    for i, payload in enumerate(g.nodes):
        if i in keep:
            remap[i] = len(nodes)
            nodes.append(payload)
    edges = []
    out: list = [[] for _ in nodes]
    for src, sig, vec, dst in g.edges:
        if src in keep and dst in keep:
            edges.append((remap[src], sig, vec, remap[dst]))
            out[remap[src]].append(len(edges) - 1)
    return ControlGraph(
        arity=g.arity, d=g.d, nodes=nodes, edges=edges, out=out,
        initial=[remap[i] for i in g.initial if i in keep],
        accepting={remap[i]: z for i, z in g.accepting.items()},
    )


# ---------------------------------------------------------------------------
# exact extrema of a scalar projection (iterated relaxation with cycle marks)


def _project(coeffs, vec) -> int:
    return sum(a * x for a, x in zip(coeffs, vec))


def bellman_ford_extrema(g: ControlGraph, coeffs, allowed: Optional[set],
                         sccs: Optional[list] = None):
    """Per-node (min, max) of the projected weight over all walks from the
    initial states inside `allowed` (None: no restriction); -inf / +inf where
    a pumpable negative / positive cycle feeds the node.

    Works on the condensation: relaxation is confined to one strongly
    connected component at a time (where a relax count past the component
    size proves a pumpable cycle and floods the component), and component
    results propagate along the acyclic quotient.  At a node n every walk
    stays inside n's own co-reachable set, so for queries at accepting nodes
    the restriction makes no difference and both the component structure and
    the unrestricted result can be shared between constraint groups."""
    if allowed is None:
        allowed = set(range(len(g.nodes)))
    if sccs is None:
        sccs = _sccs(g, allowed)
    weights = [_project(coeffs, e[2]) for e in g.edges]
    edges = g.edges
    out = g.out

    def run_min(sign: int) -> dict:
        dist: dict = {}
        seeds = set(i for i in g.initial if i in allowed)
        for i in seeds:
            dist[i] = 0
        # Tarjan emits components sinks-first; walk them sources-first.
        for comp in reversed(sccs):
            comp_set = set(comp)
            pending = [v for v in comp if v in dist]
            if not pending:
                continue
            flooded = any(dist[v] == NEG_INF for v in pending)
            if not flooded and (len(comp) > 1 or any(
                    edges[ei][3] == comp[0] for ei in out[comp[0]])):
                cap = len(comp) + 1
                counts = {v: 0 for v in pending}
                queue = deque(pending)
                inq = set(pending)
                while queue:
                    u = queue.popleft()
                    inq.discard(u)
                    du = dist[u]
                    for ei in out[u]:
                        v = edges[ei][3]
                        if v not in comp_set:
                            continue
                        dv = du + sign * weights[ei]
                        if v not in dist or dv < dist[v]:
                            dist[v] = dv
                            c = counts.get(v, 0) + 1
                            counts[v] = c
                            if c > cap:
                                flooded = True
                                queue.clear()
                                break
                            if v not in inq:
                                queue.append(v)
                                inq.add(v)
            if flooded:
                for v in comp:
                    dist[v] = NEG_INF
            # relax edges leaving the component
            for u in comp:
                if u not in dist:
                    continue
                du = dist[u]
                for ei in out[u]:
                    v = edges[ei][3]
                    if v in comp_set or v not in allowed:
                        continue
                    dv = NEG_INF if du == NEG_INF else du + sign * weights[ei]
                    if v not in dist or (dist[v] != NEG_INF and
                                         (dv == NEG_INF or dv < dist[v])):
                        dist[v] = dv
        return dist

    mins = run_min(1)
    maxs_neg = run_min(-1)
    maxs = {v: (POS_INF if d == NEG_INF else -d) for v, d in maxs_neg.items()}
    return mins, maxs


def _atom_refuted(atom: LinAtom, mn, mx) -> bool:
    """Can no value in the achievable range satisfy the atom?  The range
    endpoints are achievable, so this is exact for the order relations and
    one-sided (refutation only) for equality."""
    if mn is None:
        return True  # no accepting value at all
    if atom.rel == "le":
        return mn > atom.const
    if atom.rel == "lt":
        return mn >= atom.const
    if atom.rel == "ge":
        return mx < atom.const
    if atom.rel == "gt":
        return mx <= atom.const
    if atom.rel == "eq":
        return atom.const < mn or atom.const > mx
    if atom.rel == "ne":
        return mn == mx == atom.const
    raise ValidationError(f"unknown relation {atom.rel!r}")


def _atom_sat_by_extrema(atom: LinAtom, mn, mx) -> bool:
    """For non-equality atoms the refutation test is two-sided."""
    return not _atom_refuted(atom, mn, mx)


# ---------------------------------------------------------------------------
# cycle structure: gcd of cycle weights and residue reachability


def _sccs(g: ControlGraph, allowed: set) -> list:
    """Tarjan, iterative."""
    index: dict = {}
    low: dict = {}
    on: set = set()
    stack: list = []
    result = []
    counter = [0]

    for root in allowed:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter[0]
                counter[0] += 1
                stack.append(v)
                on.add(v)
            advanced = False
            outs = g.out[v]
            while pi < len(outs):
                _, _, _, w = g.edges[outs[pi]]
                pi += 1
                if w not in allowed:
                    continue
                if w not in index:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if w in on:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                result.append(comp)
            if work:
                u, _ = work[-1]
                low[u] = min(low[u], low[v])
    return result


def cycle_gcd(g: ControlGraph, coeffs, allowed: set):
    """(gcd of all cycle weights under the projection, any_nonzero_cycle).
    A gcd of 0 with no nonzero flag means every cycle weighs zero."""
    total_gcd = 0
    any_nonzero = False
    for comp in _sccs(g, allowed):
        if len(comp) == 1:
            v = comp[0]
            has_self = any(g.edges[ei][3] == v for ei in g.out[v])
            if not has_self:
                continue
        comp_set = set(comp)
        pot = {comp[0]: 0}
        queue = deque([comp[0]])
        inner = []
        while queue:
            u = queue.popleft()
            for ei in g.out[u]:
                _, _, vec, v = g.edges[ei]
                if v not in comp_set:
                    continue
                w = _project(coeffs, vec)
                inner.append((u, w, v))
                if v not in pot:
                    pot[v] = pot[u] + w
                    queue.append(v)
        for u, w, v in inner:
            diff = pot[u] + w - pot[v]
            if diff:
                any_nonzero = True
                total_gcd = math.gcd(total_gcd, abs(diff))
    return total_gcd, any_nonzero


_RESIDUE_GCD_LIMIT = 64


def residue_refuted(g: ControlGraph, atom: LinAtom, allowed: set,
                    targets: set, memo_cap: int) -> bool:
    """Sound UNSAT test for an equality atom: every walk weight at a target
    is congruent to a reachable residue modulo the gcd of cycle weights; if
    the required constant hits none of them, no walk can satisfy the atom."""
    G, _ = cycle_gcd(g, atom.coeffs, allowed)
    if G == 0 or G > _RESIDUE_GCD_LIMIT:
        return False
    if len(allowed) * G > memo_cap:
        return False
    want = atom.const % G
    seen = set()
    queue = deque()
    for i in g.initial:
        if i in allowed:
            conf = (i, 0)
            seen.add(conf)
            queue.append(conf)
    while queue:
        u, r = queue.popleft()
        if u in targets and r == want:
            return False  # the residue is reachable; cannot refute
        for ei in g.out[u]:
            _, _, vec, v = g.edges[ei]
            if v not in allowed:
                continue
            conf = (v, (r + _project(atom.coeffs, vec)) % G)
            if conf not in seen:
                seen.add(conf)
                queue.append(conf)
    return True


# ---------------------------------------------------------------------------
# bounded configuration search


@dataclass
class _BoundedOutcome:
    status: str  # "sat" | "exhausted" | "bound"
    letters: Optional[list] = None
    configs: int = 0


def bounded_search(g: ControlGraph, group: dict, bound: int, memo_cap: int,
                   allowed: Optional[set] = None) -> _BoundedOutcome:
    """Breadth-first over exact (state, counters) configurations.  A
    configuration seen once is never re-queued: anything acceptable from a
    later, deeper visit is acceptable from the first one too."""
    zero = (0,) * g.d
    parents: dict = {}
    queue = deque()
    for i in g.initial:
        if allowed is not None and i not in allowed:
            continue
        conf = (i, zero)
        if conf not in parents:
            parents[conf] = None
            queue.append((conf, 0))

    def witness(conf):
        letters = []
        while parents[conf] is not None:
            prev, sig = parents[conf]
            letters.append(sig)
            conf = prev
        letters.reverse()
        return letters

    for conf in list(parents):
        node, vec = conf
        z = group.get(node)
        if z is not None and constraint_holds(z, vec):
            return _BoundedOutcome("sat", witness(conf), len(parents))

    bound_hit = False
    while queue:
        conf, depth = queue.popleft()
        if depth >= bound:
            bound_hit = True
            continue
        node, vec = conf
        for ei in g.out[node]:
            _, sig, inc, v = g.edges[ei]
            if allowed is not None and v not in allowed:
                continue
            nvec = tuple(x + y for x, y in zip(vec, inc)) if g.d else zero
            nconf = (v, nvec)
            if nconf in parents:
                continue
            parents[nconf] = (conf, sig)
            if len(parents) > memo_cap:
                raise ResourceLimitError(
                    f"bounded search exceeded memo cap ({memo_cap} configurations)"
                )
            z = group.get(v)
            if z is not None and constraint_holds(z, nvec):
                return _BoundedOutcome("sat", witness(nconf), len(parents))
            queue.append((nconf, depth + 1))
    return _BoundedOutcome("bound" if bound_hit else "exhausted", None, len(parents))


# ---------------------------------------------------------------------------
# strategies


def _reach_letters(g: ControlGraph, targets: set, allowed: Optional[set],
                   memo_cap: int):
    """Shortest letter sequence from an initial state into `targets`,
    ignoring counters; (letters, states_visited) or (None, visited)."""
    parents: dict = {}
    queue = deque()
    for i in g.initial:
        if allowed is not None and i not in allowed:
            continue
        if i not in parents:
            parents[i] = None
            queue.append(i)

    def witness(v):
        letters = []
        while parents[v] is not None:
            prev, sig = parents[v]
            letters.append(sig)
            v = prev
        letters.reverse()
        return letters

    for i in list(parents):
        if i in targets:
            return witness(i), len(parents)
    while queue:
        u = queue.popleft()
        for ei in g.out[u]:
            _, sig, _, v = g.edges[ei]
            if (allowed is not None and v not in allowed) or v in parents:
                continue
            parents[v] = (u, sig)
            if len(parents) > memo_cap:
                raise ResourceLimitError(
                    f"reachability search exceeded memo cap ({memo_cap} states)"
                )
            if v in targets:
                return witness(v), len(parents)
            queue.append(v)
    return None, len(parents)


def nfa_emptiness(g: ControlGraph, memo_cap: int) -> Verdict:
    """Counter-free case: plain reachability, shortest witness first."""
    letters, visited = _reach_letters(g, set(g.accepting), None, memo_cap)
    if letters is not None:
        return Verdict("sat", letters=letters, method="bfs",
                       stats={"configs": visited})
    return Verdict("unsat", method="bfs_exhausted", stats={"configs": visited})


def default_bound(g: ControlGraph, cfg: SearchConfig) -> int:
    s = min(len(g.nodes), BOUND_CAP)
    b = int(cfg.safety_factor * s * s * (g.ell + 1) * (2 ** min(g.d + g.alpha, 20)))
    return min(b, BOUND_CAP)


def _single_atom(z):
    if isinstance(z, LinAtom):
        return z
    if isinstance(z, CAnd) and len(z.items) == 1 and isinstance(z.items[0], LinAtom):
        return z.items[0]
    return None


def parikh_emptiness(g: ControlGraph, cfg: SearchConfig) -> Verdict:
    """Dispatch per group of accepting states sharing a final constraint."""
    groups: dict = {}
    for node, z in g.accepting.items():
        groups.setdefault(z, {})[node] = z

    any_unknown = False
    methods = []
    bound_used = None
    total_configs = 0
    formula_bound = default_bound(g, cfg)

    ext_cache: dict = {}
    scc_cache: list = []

    def extrema_for(coeffs):
        # unrestricted extrema agree with the per-group restriction at every
        # accepting node, and they are shared between constraint groups
        if coeffs not in ext_cache:
            if not scc_cache:
                scc_cache.append(_sccs(g, set(range(len(g.nodes)))))
            ext_cache[coeffs] = bellman_ford_extrema(g, coeffs, None,
                                                     scc_cache[0])
        return ext_cache[coeffs]

    for z, group in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        targets = set(group)
        allowed = _coreachable(g, targets)
        atom = _single_atom(z)
        if z == C_TRUE or (isinstance(z, CAnd) and not z.items):
            letters, visited = _reach_letters(g, targets, allowed, cfg.memo_cap)
            total_configs += visited
            if letters is not None:
                return Verdict("sat", letters=letters, method="bfs",
                               stats={"configs": total_configs})
            methods.append("bfs_exhausted")
            continue

        if atom is not None and atom.rel != "eq":
            mins, maxs = extrema_for(atom.coeffs)
            sat_here = False
            for n in targets:
                mn, mx = mins.get(n), maxs.get(n)
                if mn is None:
                    continue
                if _atom_sat_by_extrema(atom, mn, mx):
                    sat_here = True
                    break
            if not sat_here:
                methods.append("bellman_ford")
                continue
            # a witness exists; find one by escalating bounded search
            b = 32
            while True:
                sub = bounded_search(g, group, b, cfg.memo_cap, allowed)
                total_configs += sub.configs
                if sub.status == "sat":
                    return Verdict("sat", letters=sub.letters,
                                   method="bellman_ford",
                                   stats={"configs": total_configs})
                if sub.status == "exhausted":
                    raise ValidationError(
                        "internal: extrema certify satisfiability but the "
                        "configuration space is exhausted"
                    )
                b *= 2

        else:
            # refutation presolve, per target: a target stays live only if
            # every conjunct's reachable-value interval admits it.  Distinct
            # targets are often killed by distinct conjuncts, so this is
            # strictly stronger than refuting one conjunct group-wide.
            atoms = list(constraint_atoms(z))
            extrema = [extrema_for(a.coeffs) for a in atoms]
            live = set()
            for n in targets:
                for a, (mins, maxs) in zip(atoms, extrema):
                    mn, mx = mins.get(n), maxs.get(n)
                    if mn is None or _atom_refuted(a, mn, mx):
                        break
                else:
                    live.add(n)
            refuted = not live
            if not refuted:
                targets = live
                group = {n: group[n] for n in live}
                allowed = _coreachable(g, targets)
                for a in atoms:
                    if a.rel == "eq" and residue_refuted(g, a, allowed,
                                                         targets,
                                                         cfg.memo_cap):
                        refuted = True
                        break
            if refuted:
                methods.append("bellman_ford")
                continue
            finite = True
            for dim in range(g.d):
                coeffs = tuple(1 if k == dim else 0 for k in range(g.d))
                _, nonzero = cycle_gcd(g, coeffs, allowed)
                if nonzero:
                    finite = False
                    break

            if cfg.bound_policy == "unbounded_refuse":
                raise ConfigError(
                    "constraint needs the bounded strategy, refused by policy"
                )
            if cfg.bound_policy == "explicit":
                b = cfg.witness_bound
            elif finite:
                # the counter space is finite: the memoised search terminates
                b = formula_bound
            else:
                b = min(formula_bound, max(128, 4 * len(g.nodes)))
            sub = bounded_search(g, group, b, cfg.memo_cap, allowed)
            total_configs += sub.configs
            if sub.status == "sat":
                return Verdict("sat", letters=sub.letters, method="bounded",
                               stats={"configs": total_configs})
            if sub.status == "bound":
                any_unknown = True
                bound_used = b if bound_used is None else max(bound_used, b)
            else:
                methods.append("bound_complete")

    if any_unknown:
        return Verdict("unknown", bound_used=bound_used,
                       stats={"configs": total_configs})
    if "bound_complete" in methods:
        method = "bound_complete"
    elif "bellman_ford" in methods:
        method = "bellman_ford"
    else:
        method = "bfs_exhausted"
    return Verdict("unsat", method=method, stats={"configs": total_configs})


def decide(acc: TupleAcceptor, cfg: SearchConfig) -> Verdict:
    g = trim(materialize(acc, cfg.memo_cap))
    if not g.accepting:
        return Verdict("unsat", method="bfs_exhausted",
                       stats={"nodes": len(g.nodes), "configs": 0})
    if g.d == 0:
        v = nfa_emptiness(g, cfg.memo_cap)
    else:
        v = parikh_emptiness(g, cfg)
    v.stats["nodes"] = len(g.nodes)
    v.stats["edges"] = len(g.edges)
    v.stats["arity"] = g.arity
    return v


def decode_witness(letters, a: Automaton, maps: VarMaps, formula) -> Verdict:
    """Turn accepted joint letters into paths and a pattern valuation, then
    re-verify against the direct semantics.  Never returns unverified."""
    word = ConvWord(arity=len(maps.path_vars), letters=tuple(letters))
    return package_witness(deconvolve(word, a), a, maps, formula)


def package_witness(paths, a: Automaton, maps: VarMaps, formula) -> Verdict:
    """Same contract as decode_witness, starting from already-decoded paths
    (one per translated path variable, in maps.path_vars order)."""
    word = convolve(paths)
    pv = dict(zip(maps.path_vars, paths))
    valuation = recover_valuation(pv, maps)
    original_paths = {v: p for v, p in valuation.items()
                      if v in {b.path_var for b in formula.bindings}}
    if not semantics.satisfies(formula, original_paths, a):
        raise WitnessSoundnessError(
            "decoded witness fails re-verification against the direct semantics"
        )
    return Verdict("sat", witness=word, valuation=valuation, paths=original_paths)
