"""Seeded random automata, sized for brute-force cross-checking.

The randomized suites compare the symbolic checker against the
path-enumerating oracle, so everything here stays small on purpose:
few states, short output words, small weights.  All sampling goes
through a caller-supplied ``random.Random`` so a seed reproduces the
exact instance.
"""

import random
from typing import Optional

from .automata import EPSILON, Automaton, OutputMonoid, Transition

NFA = "nfa"
TRANS = "trans"
SUM = "sum"

OUT_LETTERS = ("x", "y")


def random_automaton(
    rng: random.Random,
    kind: str,
    max_states: int = 4,
    max_letters: int = 2,
    max_out_len: int = 2,
    weight_range: tuple = (-3, 3),
    eps_rate: float = 0.2,
    density: Optional[float] = None,
) -> Automaton:
    """One random automaton of the given kind.

    `density` is the chance each (state, letter, state) triple carries a
    transition; by default it is drawn per instance, scaled down for
    bigger automata so the number of length-≤6 paths stays enumerable
    (the oracle walks all of them).  ε-transitions are added only for
    the plain-NFA kind, at most `eps_rate` of the non-ε count.  Initial
    states are never empty; final states may be (an automaton accepting
    nothing is a legitimate, if boring, instance).
    """
    n = rng.randint(1, max_states)
    states = tuple(f"q{i}" for i in range(n))
    letters = tuple("ab"[:rng.randint(1, max_letters)])
    if density is None:
        hi = min(0.65, 3.0 / (n * len(letters)))
        density = rng.uniform(min(0.2, hi), hi)

    if kind == NFA:
        monoid = OutputMonoid.trivial()
    elif kind == TRANS:
        monoid = OutputMonoid.words(OUT_LETTERS)
    elif kind == SUM:
        monoid = OutputMonoid.sums()
    else:
        raise ValueError(f"unknown kind {kind!r}")

    def out_value():
        if kind == NFA:
            return None
        if kind == SUM:
            return rng.randint(*weight_range)
        return "".join(
            rng.choice(OUT_LETTERS) for _ in range(rng.randint(0, max_out_len))
        )

    trans = []
    for src in states:
        for lab in letters:
            for dst in states:
                if rng.random() < density:
                    trans.append(Transition(src, lab, out_value(), dst))
    if kind == NFA and eps_rate > 0:
        budget = int(len(trans) * eps_rate)
        for _ in range(budget):
            src, dst = rng.choice(states), rng.choice(states)
            t = Transition(src, EPSILON, None, dst)
            if t not in trans:
                trans.append(t)

    initial = frozenset(rng.sample(states, rng.randint(1, n)))
    final = frozenset(q for q in states if rng.random() < 0.5)
    return Automaton(
        monoid=monoid,
        alphabet=frozenset(letters),
        states=states,
        initial=initial,
        final=final,
        transitions=tuple(trans),
        colors={},
    )


def random_dfa(rng: random.Random, max_states: int = 3,
               letters: str = "ab") -> Automaton:
    """A complete DFA: exactly one transition per (state, letter)."""
    n = rng.randint(1, max_states)
    states = tuple(f"d{i}" for i in range(n))
    trans = tuple(
        Transition(src, lab, None, rng.choice(states))
        for src in states
        for lab in letters
    )
    final = frozenset(q for q in states if rng.random() < 0.5)
    return Automaton(
        monoid=OutputMonoid.trivial(),
        alphabet=frozenset(letters),
        states=states,
        initial=frozenset({states[0]}),
        final=final,
        transitions=trans,
        colors={},
    )
