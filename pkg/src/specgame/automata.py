"""Deterministic Rabin automata.

A Dra stores a total transition table over letters encoded as bitmasks of
an ordered proposition list. Pair i of the acceptance condition holds on a
run when the states visited infinitely often avoid C_i and intersect B_i.

Reachability formulas (atoms, literals, &, |, X, F, F<=k) are translated
natively by formula progression into a DFA-shaped Dra with an absorbing
accepting sink; everything else is ingested from HOA v1 documents.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import ltl
from .ltl import (
    And,
    Atom,
    BoundedEventually,
    Eventually,
    Formula,
    LassoWord,
    Next,
    Not,
    Or,
    TRUE,
    TrueF,
    Until,
)


class HoaError(ValueError):
    """Malformed or unsupported HOA document."""


class FragmentError(ValueError):
    """Formula outside the reachability fragment."""


RabinPair = tuple[frozenset[int], frozenset[int]]  # (C_i, B_i)


@dataclass(frozen=True)
class Dra:
    ap: tuple[str, ...]
    delta: tuple[tuple[int, ...], ...]  # delta[q][letter] -> q'
    q0: int
    pairs: tuple[RabinPair, ...]
    # for unions: the (left, right) component state behind each state index
    origin: tuple[tuple[int, int], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        n = len(self.delta)
        width = 1 << len(self.ap)
        if not self.pairs:
            raise ValueError("at least one Rabin pair is required")
        if not (0 <= self.q0 < n):
            raise ValueError("initial state out of range")
        for row in self.delta:
            if len(row) != width:
                raise ValueError("transition table is not total")
            for q in row:
                if not (0 <= q < n):
                    raise ValueError("transition target out of range")
        for c, b in self.pairs:
            if any(q >= n for q in c | b):
                raise ValueError("acceptance set references unknown state")

    @property
    def n_states(self) -> int:
        return len(self.delta)

    def letter(self, labels) -> int:
        """Bitmask of a label set, ignoring propositions outside ap."""
        mask = 0
        for i, p in enumerate(self.ap):
            if p in labels:
                mask |= 1 << i
        return mask

    def step(self, q: int, labels) -> int:
        return self.delta[q][self.letter(labels)]


def letter_labels(ap: tuple[str, ...], mask: int) -> frozenset[str]:
    return frozenset(p for i, p in enumerate(ap) if mask & (1 << i))


def accept_all(ap: tuple[str, ...] = ()) -> Dra:
    """One-state automaton accepting every word."""
    width = 1 << len(ap)
    return Dra(ap, ((0,) * width,), 0, ((frozenset(), frozenset({0})),))


# ---------------------------------------------------------------------------
# Acceptance on lasso words


def run_dra(a: Dra, w: LassoWord) -> bool:
    """Simulate stem then loop until (state, loop position) repeats; apply
    the Rabin condition to the states on the terminal cycle."""
    q = a.q0
    for labels in w.stem:
        q = a.step(q, labels)
    seen: dict[tuple[int, int], int] = {}
    trace: list[int] = []
    pos = 0
    while (q, pos) not in seen:
        seen[(q, pos)] = len(trace)
        trace.append(q)
        q = a.step(q, w.loop[pos])
        pos = (pos + 1) % len(w.loop)
    cycle = set(trace[seen[(q, pos)]:])
    return any(not (cycle & c) and (cycle & b) for c, b in a.pairs)


def winning_sink_states(a: Dra) -> frozenset[int]:
    """States whose entire forward closure stays inside B_i \\ C_i for some
    pair i; any run entering such a component is accepted."""
    width = 1 << len(a.ap)
    out: set[int] = set()
    for c, b in a.pairs:
        candidate = set(b - c)
        changed = True
        while changed:
            changed = False
            for q in list(candidate):
                if any(a.delta[q][m] not in candidate for m in range(width)):
                    candidate.discard(q)
                    changed = True
        out |= candidate
    return frozenset(out)


# ---------------------------------------------------------------------------
# Reachability-fragment translation by formula progression

_DNF = frozenset  # frozenset of frozensets of temporal-atom formulas


def _collapse_zero(f: Formula) -> Formula:
    if isinstance(f, BoundedEventually):
        sub = _collapse_zero(f.sub)
        return sub if f.bound == 0 else BoundedEventually(f.bound, sub)
    if isinstance(f, Not):
        return Not(_collapse_zero(f.sub))
    if isinstance(f, (And, Or, Until)):
        cls = type(f)
        return cls(_collapse_zero(f.left), _collapse_zero(f.right))
    if isinstance(f, (Next, Eventually, ltl.Always)):
        cls = type(f)
        return cls(_collapse_zero(f.sub))
    return f


def _check_fragment(f: Formula) -> None:
    if isinstance(f, (TrueF, Atom)):
        return
    if isinstance(f, Not):
        if isinstance(f.sub, (Atom, TrueF)):
            return
        raise FragmentError("negation above a temporal operator is outside the fragment")
    if isinstance(f, (And, Or)):
        _check_fragment(f.left)
        _check_fragment(f.right)
        return
    if isinstance(f, (Next, Eventually, BoundedEventually)):
        _check_fragment(f.sub)
        return
    name = type(f).__name__
    raise FragmentError(f"{name} is outside the reachability fragment")


def _dnf(f: Formula) -> _DNF:
    if isinstance(f, TrueF):
        return frozenset({frozenset()})
    if f == ltl.FALSE:
        return frozenset()
    if isinstance(f, And):
        left, right = _dnf(f.left), _dnf(f.right)
        return _subsume(frozenset(a | b for a in left for b in right))
    if isinstance(f, Or):
        return _subsume(_dnf(f.left) | _dnf(f.right))
    return frozenset({frozenset({f})})


def _subsume(clauses: _DNF) -> _DNF:
    kept = [c for c in clauses if not any(o < c for o in clauses)]
    # also drop duplicates of any strict-subset survivor
    return frozenset(kept)


def _prog(f: Formula, labels: frozenset[str]) -> Formula:
    """One-letter progression: w satisfies f iff w[1:] satisfies prog(f, w[0])."""
    if isinstance(f, TrueF):
        return TRUE
    if f == ltl.FALSE:
        return ltl.FALSE
    if isinstance(f, Atom):
        return TRUE if f.name in labels else ltl.FALSE
    if isinstance(f, Not):  # literal, checked by _check_fragment
        return ltl.FALSE if f.sub.name in labels else TRUE
    if isinstance(f, And):
        return _and(_prog(f.left, labels), _prog(f.right, labels))
    if isinstance(f, Or):
        return _or(_prog(f.left, labels), _prog(f.right, labels))
    if isinstance(f, Next):
        return f.sub
    if isinstance(f, Eventually):
        return _or(_prog(f.sub, labels), f)
    if isinstance(f, BoundedEventually):
        now = _prog(f.sub, labels)
        if f.bound == 0:
            return now
        if f.bound == 1:
            return _or(now, f.sub)
        return _or(now, BoundedEventually(f.bound - 1, f.sub))
    raise FragmentError(f"{type(f).__name__} is outside the reachability fragment")


def _and(a: Formula, b: Formula) -> Formula:
    if isinstance(a, TrueF):
        return b
    if isinstance(b, TrueF):
        return a
    if a == ltl.FALSE or b == ltl.FALSE:
        return ltl.FALSE
    return And(a, b)


def _or(a: Formula, b: Formula) -> Formula:
    if isinstance(a, TrueF) or isinstance(b, TrueF):
        return TRUE
    if a == ltl.FALSE:
        return b
    if b == ltl.FALSE:
        return a
    return Or(a, b)


def translate_reachability(f: Formula) -> Dra:
    """DFA-shaped Dra for a reachability formula.

    States are obligation sets in disjunctive normal form; the empty
    obligation is the absorbing accepting sink. Single pair with C empty.
    """
    f = _collapse_zero(f)
    _check_fragment(f)
    ap = tuple(sorted(ltl.atoms_of(f)))
    width = 1 << len(ap)
    letters = [letter_labels(ap, m) for m in range(width)]

    true_dnf: _DNF = frozenset({frozenset()})
    false_dnf: _DNF = frozenset()

    def successor(state: _DNF, labels: frozenset[str]) -> _DNF:
        clauses: set[frozenset] = set()
        for clause in state:
            term: Formula = TRUE
            for t in clause:
                term = _and(term, _prog(t, labels))
                if term == ltl.FALSE:
                    break
            for c in _dnf(term):
                clauses.add(c)
        return _subsume(frozenset(clauses))

    start = _dnf(f)
    index: dict[_DNF, int] = {start: 0}
    order: list[_DNF] = [start]
    rows: list[list[int]] = []
    i = 0
    while i < len(order):
        state = order[i]
        row = []
        for m in range(width):
            if state == true_dnf:
                nxt = true_dnf
            elif state == false_dnf:
                nxt = false_dnf
            else:
                nxt = successor(state, letters[m])
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
            row.append(index[nxt])
        rows.append(row)
        i += 1
    b = frozenset({index[true_dnf]}) if true_dnf in index else frozenset()
    return Dra(ap, tuple(tuple(r) for r in rows), 0, ((frozenset(), b),))


# ---------------------------------------------------------------------------
# Union


def _reindex(a: Dra, ap: tuple[str, ...]) -> Dra:
    """Re-express a over a superset proposition list; new propositions are
    ignored by the transitions."""
    if a.ap == ap:
        return a
    if not set(a.ap) <= set(ap):
        raise ValueError("proposition mismatch: cannot re-index")
    width = 1 << len(ap)
    delta = tuple(
        tuple(a.delta[q][a.letter(letter_labels(ap, m))] for m in range(width))
        for q in range(a.n_states)
    )
    return Dra(ap, delta, a.q0, a.pairs)


def dra_union(a: Dra, b: Dra) -> Dra:
    """Product-state automaton accepting whatever a or b accepts; the pair
    lists concatenate, so the pair count is k_a + k_b."""
    ap = a.ap + tuple(p for p in b.ap if p not in a.ap)
    a = _reindex(a, ap)
    b = _reindex(b, ap)
    width = 1 << len(ap)
    nb = b.n_states

    def idx(qa: int, qb: int) -> int:
        return qa * nb + qb

    delta = tuple(
        tuple(idx(a.delta[qa][m], b.delta[qb][m]) for m in range(width))
        for qa in range(a.n_states)
        for qb in range(nb)
    )
    origin = tuple((qa, qb) for qa in range(a.n_states) for qb in range(nb))
    pairs: list[RabinPair] = []
    for c, bset in a.pairs:
        pairs.append((
            frozenset(idx(q, qb) for q in c for qb in range(nb)),
            frozenset(idx(q, qb) for q in bset for qb in range(nb)),
        ))
    for c, bset in b.pairs:
        pairs.append((
            frozenset(idx(qa, q) for qa in range(a.n_states) for q in c),
            frozenset(idx(qa, q) for qa in range(a.n_states) for q in bset),
        ))
    return Dra(ap, delta, idx(a.q0, b.q0), tuple(pairs), origin=origin)


# ---------------------------------------------------------------------------
# HOA v1 (deterministic, complete, state-based Rabin acceptance)


def _parse_label_expr(expr: str, n_ap: int) -> list[int]:
    """Evaluate an edge label over all letters; returns matching bitmasks."""
    tokens = re.findall(r"\d+|[tf!&|()]", expr)
    if "".join(tokens).replace(" ", "") != expr.replace(" ", ""):
        raise HoaError(f"bad label expression {expr!r}")

    def parse(pos):
        def or_expr(pos):
            val, pos = and_expr(pos)
            while pos < len(tokens) and tokens[pos] == "|":
                rhs, pos = and_expr(pos + 1)
                val = [a or b for a, b in zip(val, rhs)]
            return val, pos

        def and_expr(pos):
            val, pos = unary(pos)
            while pos < len(tokens) and tokens[pos] == "&":
                rhs, pos = unary(pos + 1)
                val = [a and b for a, b in zip(val, rhs)]
            return val, pos

        def unary(pos):
            if pos >= len(tokens):
                raise HoaError(f"bad label expression {expr!r}")
            tok = tokens[pos]
            if tok == "!":
                val, pos = unary(pos + 1)
                return [not v for v in val], pos
            if tok == "(":
                val, pos = or_expr(pos + 1)
                if pos >= len(tokens) or tokens[pos] != ")":
                    raise HoaError(f"unbalanced parentheses in {expr!r}")
                return val, pos + 1
            if tok == "t":
                return [True] * (1 << n_ap), pos + 1
            if tok == "f":
                return [False] * (1 << n_ap), pos + 1
            if tok.isdigit():
                i = int(tok)
                if i >= n_ap:
                    raise HoaError(f"AP index {i} out of range")
                return [bool(m & (1 << i)) for m in range(1 << n_ap)], pos + 1
            raise HoaError(f"bad label expression {expr!r}")

        return or_expr(pos)

    val, pos = parse(0)
    if pos != len(tokens):
        raise HoaError(f"bad label expression {expr!r}")
    return [m for m, ok in enumerate(val) if ok]


def _parse_acceptance(expr: str, n_sets: int) -> list[tuple[int, int]]:
    """Acceptance condition as (Fin-set, Inf-set) index pairs."""
    pairs = []
    for term in expr.split("|"):
        term = term.strip()
        m = re.fullmatch(
            r"\(?\s*Fin\s*\(\s*(\d+)\s*\)\s*&\s*Inf\s*\(\s*(\d+)\s*\)\s*\)?", term
        )
        if m is None:
            m = re.fullmatch(
                r"\(?\s*Inf\s*\(\s*(\d+)\s*\)\s*&\s*Fin\s*\(\s*(\d+)\s*\)\s*\)?", term
            )
            if m is None:
                raise HoaError(f"acceptance is not a disjunction of Rabin pairs: {term!r}")
            inf_i, fin_i = int(m.group(1)), int(m.group(2))
        else:
            fin_i, inf_i = int(m.group(1)), int(m.group(2))
        if fin_i >= n_sets or inf_i >= n_sets:
            raise HoaError("acceptance set index out of range")
        pairs.append((fin_i, inf_i))
    return pairs


def parse_hoa(text: str) -> Dra:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("/*")]
    try:
        body_at = lines.index("--BODY--")
    except ValueError:
        raise HoaError("missing --BODY--") from None
    header, body = lines[:body_at], lines[body_at + 1:]
    if "--END--" in body:
        body = body[: body.index("--END--")]

    n_states = start = None
    ap: tuple[str, ...] | None = None
    n_sets = None
    acc_expr = None
    for ln in header:
        if ln.startswith("HOA:"):
            if ln.split(":", 1)[1].strip() != "v1":
                raise HoaError("only HOA v1 is supported")
        elif ln.startswith("States:"):
            n_states = int(ln.split(":", 1)[1])
        elif ln.startswith("Start:"):
            start = int(ln.split(":", 1)[1])
        elif ln.startswith("AP:"):
            parts = ln.split(":", 1)[1].split(None, 1)
            count = int(parts[0])
            names = re.findall(r'"([^"]*)"', parts[1] if len(parts) > 1 else "")
            if len(names) != count:
                raise HoaError("AP count does not match the listed names")
            ap = tuple(names)
        elif ln.startswith("Acceptance:"):
            rest = ln.split(":", 1)[1].split(None, 1)
            n_sets = int(rest[0])
            acc_expr = rest[1] if len(rest) > 1 else ""
        elif ln.startswith("acc-name:"):
            name = ln.split(":", 1)[1].split()
            if name and name[0] not in ("Rabin", "streett-like", "Buchi"):
                raise HoaError(f"unsupported acc-name {name[0]!r}")
            if name and name[0] == "Buchi":
                raise HoaError("Buchi acceptance is not supported; use Rabin pairs")
    if None in (n_states, start, ap, n_sets, acc_expr):
        raise HoaError("missing mandatory header item")
    acc_pairs = _parse_acceptance(acc_expr, n_sets)

    width = 1 << len(ap)
    delta = [[-1] * width for _ in range(n_states)]
    membership: list[set[int]] = [set() for _ in range(n_states)]
    current = None
    for ln in body:
        if ln.startswith("State:"):
            rest = ln.split(":", 1)[1].strip()
            m = re.fullmatch(r"(\d+)\s*(?:\{([\d\s]*)\})?", rest)
            if m is None:
                raise HoaError(f"bad state line {ln!r}")
            current = int(m.group(1))
            if current >= n_states:
                raise HoaError(f"state {current} out of range")
            if m.group(2):
                membership[current] = {int(x) for x in m.group(2).split()}
        else:
            if current is None:
                raise HoaError("edge before any State: line")
            m = re.fullmatch(r"\[(.*)\]\s*(\d+)\s*(\{.*\})?", ln)
            if m is None:
                raise HoaError(f"bad edge line {ln!r}")
            if m.group(3):
                raise HoaError("transition-based acceptance is not supported")
            dest = int(m.group(2))
            if dest >= n_states:
                raise HoaError(f"edge target {dest} out of range")
            for mask in _parse_label_expr(m.group(1), len(ap)):
                if delta[current][mask] != -1:
                    raise HoaError(
                        f"nondeterministic: state {current} has two edges on the "
                        f"same letter"
                    )
                delta[current][mask] = dest
    for q, row in enumerate(delta):
        if -1 in row:
            raise HoaError(f"incomplete: state {q} lacks an edge for some letter")

    pairs = tuple(
        (
            frozenset(q for q in range(n_states) if fin_i in membership[q]),
            frozenset(q for q in range(n_states) if inf_i in membership[q]),
        )
        for fin_i, inf_i in acc_pairs
    )
    return Dra(ap, tuple(tuple(r) for r in delta), start, pairs)


def write_hoa(a: Dra) -> str:
    """Serialize; parse_hoa(write_hoa(a)) reproduces a exactly."""
    lines = [
        "HOA: v1",
        f"States: {a.n_states}",
        f"Start: {a.q0}",
        "AP: {} {}".format(len(a.ap), " ".join(f'"{p}"' for p in a.ap)).rstrip(),
        f"acc-name: Rabin {len(a.pairs)}",
        "Acceptance: {} {}".format(
            2 * len(a.pairs),
            " | ".join(f"(Fin({2 * i}) & Inf({2 * i + 1}))" for i in range(len(a.pairs))),
        ),
        "properties: deterministic complete state-acc",
        "--BODY--",
    ]
    width = 1 << len(a.ap)
    for q in range(a.n_states):
        sets = []
        for i, (c, b) in enumerate(a.pairs):
            if q in c:
                sets.append(2 * i)
            if q in b:
                sets.append(2 * i + 1)
        suffix = " {%s}" % " ".join(map(str, sets)) if sets else ""
        lines.append(f"State: {q}{suffix}")
        for mask in range(width):
            if a.ap:
                label = "&".join(
                    (f"{i}" if mask & (1 << i) else f"!{i}") for i in range(len(a.ap))
                )
            else:
                label = "t"
            lines.append(f"[{label}] {a.delta[q][mask]}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"
