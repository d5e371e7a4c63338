"""Regenerates the bundled task automata and grid documents.

The two task conditions lie outside the reachability fragment, so their
automata are constructed directly and cross-validated against the lasso
evaluator before being written as HOA.

Run from the repository root: python3 tools/make_fixtures.py
"""

from __future__ import annotations

import pathlib
import random
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from specgame.automata import Dra, letter_labels, run_dra, write_hoa
from specgame.ltl import LassoWord, eval_lasso, parse_ltl

OUT = pathlib.Path(__file__).resolve().parent.parent / "src" / "specgame" / "fixtures"


def surveillance_dra() -> Dra:
    """G F b & G F c & F G d over ap (b, c, d).

    State (w, dflag, ping): w is the patrol phase (0 awaiting b, 1 awaiting
    c), dflag records whether d held on the letter just read, ping marks
    completion of a b-then-c round. Accepting runs see dflag=0 finitely
    often (so eventually always d) and d-flagged pings infinitely often;
    pings on dflag=0 states stay out of B so the pair's C and B sets are
    disjoint, which changes nothing once d holds forever.
    """
    ap = ("b", "c", "d")

    def idx(w, dflag, ping):
        return (w << 2) | (dflag << 1) | ping

    delta = []
    for w in (0, 1):
        for dflag in (0, 1):
            for ping in (0, 1):
                row = []
                for mask in range(1 << len(ap)):
                    labels = letter_labels(ap, mask)
                    if w == 0:
                        w2, ping2 = (1, 0) if "b" in labels else (0, 0)
                    else:
                        w2, ping2 = (0, 1) if "c" in labels else (1, 0)
                    row.append(idx(w2, 1 if "d" in labels else 0, ping2))
                delta.append(tuple(row))
    c_set = frozenset(idx(w, 0, p) for w in (0, 1) for p in (0, 1))
    b_set = frozenset(idx(w, 1, 1) for w in (0, 1))
    return Dra(ap, tuple(delta), idx(0, 1, 0), ((c_set, b_set),))


def sequence_dra() -> Dra:
    """F (b & F (c & F (d & F e))) & G !a over ap (a, b, c, d, e).

    States 0..4 count sequence progress with a within-letter cascade
    (a letter carrying both b and c advances two steps); state 5 is the
    absorbing failure state entered on any a.
    """
    ap = ("a", "b", "c", "d", "e")
    targets = ("b", "c", "d", "e")
    delta = []
    for q in range(6):
        row = []
        for mask in range(1 << len(ap)):
            labels = letter_labels(ap, mask)
            if q == 5 or "a" in labels:
                row.append(5)
                continue
            p = q
            while p < 4 and targets[p] in labels:
                p += 1
            row.append(p)
        delta.append(tuple(row))
    return Dra(ap, tuple(delta), 0, ((frozenset(), frozenset({4})),))


def validate(dra: Dra, formula_text: str, samples: int = 4000, seed: int = 2024):
    f = parse_ltl(formula_text)
    rng = random.Random(seed)
    props = list(dra.ap)
    for i in range(samples):
        stem = [
            frozenset(p for p in props if rng.random() < 0.4)
            for _ in range(rng.randrange(0, 6))
        ]
        loop = [
            frozenset(p for p in props if rng.random() < 0.4)
            for _ in range(rng.randrange(1, 5))
        ]
        w = LassoWord.of(stem=stem, loop=loop)
        want = eval_lasso(f, w)
        got = run_dra(dra, w)
        if want != got:
            raise AssertionError(
                f"{formula_text}: mismatch on sample {i}: stem={stem} loop={loop} "
                f"eval={want} dra={got}"
            )
    print(f"validated {formula_text!r} on {samples} lassos")


SURVEILLANCE_GRID = """\
# Patrol world: visit b and c forever while eventually staying inside the
# d-labeled safe region. The cell east of c carries no d label; slipping
# or being pushed there breaks the F G d obligation.
rows: 7
cols: 9
p_intended: 0.8
p_side: 0.1
ap: [b, c, d]
labels:
"""

SEQUENCE_GRID = """\
# Delivery world: reach b, c, d, e in order while never entering the
# a-labeled danger column. The start cell sits three moves south of the
# danger zone.
rows: 7
cols: 9
p_intended: 0.8
p_side: 0.1
ap: [a, b, c, d, e]
labels:
"""


def surveillance_grid() -> str:
    lines = [SURVEILLANCE_GRID]
    for r in range(1, 6):
        for c in range(1, 7):
            if (r, c) == (3, 6):
                continue  # the unsafe pocket east of c
            if (r, c) == (3, 3):
                lines.append(f'  "{r},{c}": [b, d]\n')
            elif (r, c) == (3, 5):
                lines.append(f'  "{r},{c}": [c, d]\n')
            else:
                lines.append(f'  "{r},{c}": [d]\n')
    return "".join(lines)


def sequence_grid() -> str:
    lines = [SEQUENCE_GRID]
    for r in range(4):
        lines.append(f'  "{r},4": [a]\n')
    lines.append('  "6,2": [b]\n')
    lines.append('  "6,6": [c]\n')
    lines.append('  "4,8": [d]\n')
    lines.append('  "2,8": [e]\n')
    return "".join(lines)


SURVEILLANCE_RUN = """\
# End-to-end surveillance experiment at the full training budget.
grid: surveillance.grid
task: task_surveillance.hoa
ids: {m: 0, n: 1, extended: true}
start: [3, 1]
episodes: 512000
steps: 1000
gamma: 0.999
gamma_curriculum: 0.99
epsilon: [0.5, 0.05]
alpha: [0.5, 0.05]
seed: 0
skip_detected_attacks: true
start_dist: uniform-product
"""


def main():
    OUT.mkdir(exist_ok=True)
    a1 = surveillance_dra()
    validate(a1, "G F b & G F c & F G d")
    (OUT / "task_surveillance.hoa").write_text(write_hoa(a1))
    a2 = sequence_dra()
    validate(a2, "F (b & F (c & F (d & F e))) & G !a")
    (OUT / "task_sequence.hoa").write_text(write_hoa(a2))
    (OUT / "surveillance.grid").write_text(surveillance_grid())
    (OUT / "sequence.grid").write_text(sequence_grid())
    (OUT / "surveillance.run").write_text(SURVEILLANCE_RUN)
    print("fixtures written to", OUT)


if __name__ == "__main__":
    main()
