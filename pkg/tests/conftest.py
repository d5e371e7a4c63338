import random
from importlib.resources import files

import pytest

from specgame.automata import translate_reachability
from specgame.game import ATT, CTRL, STOCH, from_state_labels
from specgame.ltl import (
    And,
    Atom,
    BoundedEventually,
    Eventually,
    Next,
    Not,
    Or,
    TRUE,
)
from specgame.product import build_product


@pytest.fixture(scope="session")
def fixtures():
    return files("specgame") / "fixtures"


def random_fragment_formula(rng: random.Random, depth: int, props=("a", "b")):
    if depth == 0 or rng.random() < 0.35:
        pick = rng.randrange(4)
        if pick == 0:
            return TRUE
        if pick == 1:
            return Not(Atom(rng.choice(props)))
        return Atom(rng.choice(props))
    kind = rng.randrange(5)
    if kind == 0:
        return And(
            random_fragment_formula(rng, depth - 1, props),
            random_fragment_formula(rng, depth - 1, props),
        )
    if kind == 1:
        return Or(
            random_fragment_formula(rng, depth - 1, props),
            random_fragment_formula(rng, depth - 1, props),
        )
    if kind == 2:
        return Next(random_fragment_formula(rng, depth - 1, props))
    if kind == 3:
        return Eventually(random_fragment_formula(rng, depth - 1, props))
    return BoundedEventually(
        rng.randrange(0, 3), random_fragment_formula(rng, depth - 1, props)
    )


def random_tiny_game(rng: random.Random, n_states=None, props=("a", "b")):
    """Small well-formed turn-based game with random structure."""
    n = n_states or rng.randrange(3, 7)
    owner = [rng.choice([CTRL, ATT, STOCH]) for _ in range(n)]
    owner[0] = CTRL
    avail, succ, labels = [], [], []
    for s in range(n):
        if owner[s] == STOCH:
            avail.append((0,))
            k = rng.randrange(2, 4)
            dests = [rng.randrange(n) for _ in range(k)]
            raw = [rng.random() + 0.05 for _ in range(k)]
            total = sum(raw)
            probs = [x / total for x in raw]
            probs[-1] = 1.0 - sum(probs[:-1])
            succ.append([list(zip(probs, dests))])
        else:
            na = rng.randrange(1, 4)
            avail.append(tuple(range(na)))
            succ.append([rng.randrange(n) for _ in range(na)])
        labels.append({p for p in props if rng.random() < 0.35})
    return from_state_labels(
        owner=owner,
        actions=[f"a{i}" for i in range(4)],
        avail=avail,
        succ=succ,
        s0=0,
        ap=props,
        labels=labels,
    )


def random_tiny_product(rng: random.Random, max_product_states=24, props=("a", "b")):
    """Random single-pair product with at most max_product_states states."""
    while True:
        f = random_fragment_formula(rng, depth=rng.randrange(1, 3), props=props)
        # force the full proposition list into the automaton alphabet
        dead = Not(TRUE)
        for p in props:
            dead = And(dead, Atom(p))
        dra = translate_reachability(Or(f, dead))
        if dra.n_states < 2:
            continue
        limit = max_product_states // dra.n_states
        if limit < 3:
            continue
        g = random_tiny_game(rng, n_states=rng.randrange(3, limit + 1), props=props)
        g.validate()
        return build_product(g, dra)
