"""LTL formulas over finite label alphabets.

Provides the AST, a text parser/printer, rewriting of the derived
operators (F, G, F<=k) into the core connectives, builders for the
window-based intrusion-detection formulas, and an evaluator for
ultimately periodic (lasso) words.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence


class LtlSyntaxError(ValueError):
    """Raised on malformed formula text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Formula:
    """Base class for all formula nodes. Instances are immutable."""

    def __str__(self) -> str:
        return format_ltl(self)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str

    def __post_init__(self):
        if not re.fullmatch(r"[a-z][a-z0-9_]*", self.name):
            raise ValueError(f"invalid atom name {self.name!r}")


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    sub: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Always(Formula):
    sub: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    sub: Formula


@dataclass(frozen=True)
class BoundedEventually(Formula):
    bound: int
    sub: Formula

    def __post_init__(self):
        if not isinstance(self.bound, int) or self.bound < 0:
            raise ValueError("bound of F<=k must be a non-negative integer")


TRUE = TrueF()
FALSE = Not(TRUE)


def atoms_of(f: Formula) -> frozenset[str]:
    """All proposition names occurring in f."""
    out: set[str] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Atom):
            out.add(g.name)
        elif isinstance(g, (Not, Next, Always, Eventually)):
            stack.append(g.sub)
        elif isinstance(g, BoundedEventually):
            stack.append(g.sub)
        elif isinstance(g, (And, Or, Until)):
            stack.extend((g.left, g.right))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<bounded>F<=(?P<bound>-?\d+))"
    r"|(?P<lpar>\()|(?P<rpar>\))"
    r"|(?P<and>&)|(?P<or>\|)|(?P<not>!)"
    r"|(?P<word>[A-Za-z][A-Za-z0-9_<=]*))"
)

_KEYWORDS = {"true", "false", "X", "F", "G", "U"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise LtlSyntaxError(f"unknown token {text[pos:].split()[0]!r}", pos)
        kind = next(k for k in ("bounded", "lpar", "rpar", "and", "or", "not", "word")
                    if m.group(k) is not None)
        value = m.group(kind)
        start = m.start(kind)
        if kind == "bounded":
            if m.group("bound").startswith("-"):
                raise LtlSyntaxError("bound of F<= must be non-negative", start)
        elif kind == "word":
            if value not in _KEYWORDS and not re.fullmatch(r"[a-z][a-z0-9_]*", value):
                raise LtlSyntaxError(f"unknown token {value!r}", start)
        tokens.append((kind, value, start))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise LtlSyntaxError("unexpected end of input", len(self.text))
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.or_expr()
        tok = self.peek()
        if tok is not None:
            raise LtlSyntaxError(f"trailing input {tok[1]!r}", tok[2])
        return f

    def or_expr(self) -> Formula:
        f = self.and_expr()
        while (tok := self.peek()) is not None and tok[0] == "or":
            self.take()
            f = Or(f, self.and_expr())
        return f

    def and_expr(self) -> Formula:
        f = self.until_expr()
        while (tok := self.peek()) is not None and tok[0] == "and":
            self.take()
            f = And(f, self.until_expr())
        return f

    def until_expr(self) -> Formula:
        f = self.unary_expr()
        tok = self.peek()
        if tok is not None and tok[0] == "word" and tok[1] == "U":
            self.take()
            return Until(f, self.until_expr())  # right-associative
        return f

    def unary_expr(self) -> Formula:
        tok = self.take()
        kind, value, pos = tok
        if kind == "not":
            return Not(self.unary_expr())
        if kind == "bounded":
            return BoundedEventually(int(value[3:]), self.unary_expr())
        if kind == "lpar":
            f = self.or_expr()
            nxt = self.take()
            if nxt[0] != "rpar":
                raise LtlSyntaxError("expected ')'", nxt[2])
            return f
        if kind == "word":
            if value == "X":
                return Next(self.unary_expr())
            if value == "F":
                return Eventually(self.unary_expr())
            if value == "G":
                return Always(self.unary_expr())
            if value == "true":
                return TRUE
            if value == "false":
                return FALSE
            if value == "U":
                raise LtlSyntaxError("'U' needs a left operand", pos)
            return Atom(value)
        raise LtlSyntaxError(f"unexpected token {value!r}", pos)


def parse_ltl(text: str) -> Formula:
    """Parse formula text into the unique AST under the declared grammar."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Printing

# precedence: | < & < U < unary/atomic
_PREC_OR, _PREC_AND, _PREC_UNTIL, _PREC_UNARY = 1, 2, 3, 4


def _fmt(f: Formula, parent_prec: int) -> str:
    if isinstance(f, TrueF):
        return "true"
    if f == FALSE:
        return "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        return f"! {_fmt(f.sub, _PREC_UNARY)}"
    if isinstance(f, Next):
        return _wrap(f"X {_fmt(f.sub, _PREC_UNARY)}", _PREC_UNARY, parent_prec)
    if isinstance(f, Eventually):
        return _wrap(f"F {_fmt(f.sub, _PREC_UNARY)}", _PREC_UNARY, parent_prec)
    if isinstance(f, Always):
        return _wrap(f"G {_fmt(f.sub, _PREC_UNARY)}", _PREC_UNARY, parent_prec)
    if isinstance(f, BoundedEventually):
        return _wrap(f"F<={f.bound} {_fmt(f.sub, _PREC_UNARY)}", _PREC_UNARY, parent_prec)
    if isinstance(f, Until):
        # right-associative: parenthesize an Until appearing on the left
        s = f"{_fmt(f.left, _PREC_UNTIL + 1)} U {_fmt(f.right, _PREC_UNTIL)}"
        return _wrap(s, _PREC_UNTIL, parent_prec)
    if isinstance(f, And):
        s = f"{_fmt(f.left, _PREC_AND)} & {_fmt(f.right, _PREC_AND + 1)}"
        return _wrap(s, _PREC_AND, parent_prec)
    if isinstance(f, Or):
        s = f"{_fmt(f.left, _PREC_OR)} | {_fmt(f.right, _PREC_OR + 1)}"
        return _wrap(s, _PREC_OR, parent_prec)
    raise TypeError(f"not a formula: {f!r}")


def _wrap(s: str, prec: int, parent_prec: int) -> str:
    return f"( {s} )" if prec < parent_prec else s


def format_ltl(f: Formula) -> str:
    """Render f as text; parse_ltl(format_ltl(f)) == f."""
    return _fmt(f, 0)


# ---------------------------------------------------------------------------
# Rewriting the derived operators


def _bev(k: int, f: Formula) -> Formula:
    """F<=k with the k=0 collapse: F<=0 f is f itself."""
    return f if k == 0 else BoundedEventually(k, f)


def expand_sugar(f: Formula) -> Formula:
    """Rewrite F, G and F<=k so only the core connectives remain.

    F f becomes true U f; G f becomes !(true U !f); F<=k f becomes the
    disjunction f | X f | ... | X^k f covering the k+1 positions starting
    now, so F<=0 f collapses to f.
    """
    if isinstance(f, (TrueF, Atom)):
        return f
    if isinstance(f, Not):
        return Not(expand_sugar(f.sub))
    if isinstance(f, And):
        return And(expand_sugar(f.left), expand_sugar(f.right))
    if isinstance(f, Or):
        return Or(expand_sugar(f.left), expand_sugar(f.right))
    if isinstance(f, Next):
        return Next(expand_sugar(f.sub))
    if isinstance(f, Until):
        return Until(expand_sugar(f.left), expand_sugar(f.right))
    if isinstance(f, Eventually):
        return Until(TRUE, expand_sugar(f.sub))
    if isinstance(f, Always):
        return Not(Until(TRUE, Not(expand_sugar(f.sub))))
    if isinstance(f, BoundedEventually):
        sub = expand_sugar(f.sub)
        out = term = sub
        for _ in range(f.bound):
            term = Next(term)
            out = Or(out, term)
        return out
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# IDS formula builders

ANOMALY = Atom("anomaly")
ATTACK = Atom("attack")


def build_alarm(windows: Sequence[int]) -> Formula:
    """Window-based alarm: an anomaly followed by further anomalies within
    the given windows, right-nested."""
    if len(windows) == 0:
        raise ValueError("window list must be nonempty")
    core: Formula = ANOMALY
    for m in reversed(windows):
        if m < 0:
            raise ValueError("windows must be non-negative")
        core = And(ANOMALY, Next(_bev(m, core)))
    return Eventually(core)


def build_detect(n: int) -> Formula:
    """High-alert detection: any attack within the n-step window."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return _bev(n, ATTACK)


def build_ids(m: int, n: int, extended: bool = False) -> Formula:
    """Alarm window m spliced with detection window n.

    With extended=True the detected attack must be followed by a second
    attack, covering attackers willing to be caught.
    """
    if m < 0 or n < 0:
        raise ValueError("windows must be non-negative")
    target: Formula = ATTACK
    if extended:
        target = And(ATTACK, Next(Eventually(ATTACK)))
    inner = And(ANOMALY, Next(_bev(n, target)))
    return Eventually(And(ANOMALY, Next(_bev(m, inner))))


def build_win(ids: Formula, task: Formula) -> Formula:
    """Controller winning condition: detection or task completion."""
    return Or(ids, task)


# ---------------------------------------------------------------------------
# Lasso-word evaluation


@dataclass(frozen=True)
class LassoWord:
    """Ultimately periodic word stem . loop^omega over label sets."""

    stem: tuple[frozenset[str], ...]
    loop: tuple[frozenset[str], ...]

    def __post_init__(self):
        if len(self.loop) == 0:
            raise ValueError("loop must be nonempty")

    @staticmethod
    def of(stem: Iterable[Iterable[str]], loop: Iterable[Iterable[str]]) -> "LassoWord":
        return LassoWord(
            tuple(frozenset(s) for s in stem),
            tuple(frozenset(s) for s in loop),
        )

    def positions(self) -> int:
        return len(self.stem) + len(self.loop)

    def succ(self, i: int) -> int:
        n = self.positions()
        return i + 1 if i + 1 < n else len(self.stem)

    def label(self, i: int) -> frozenset[str]:
        if i < len(self.stem):
            return self.stem[i]
        return self.loop[i - len(self.stem)]


def eval_lasso(f: Formula, w: LassoWord) -> bool:
    """Whether the infinite word stem.loop^omega satisfies f.

    Atoms not present in a label set read as false. Until and its derived
    operators are solved by fixed-point iteration around the loop.
    """
    return _eval_at(f, w, {})[0]


def _eval_at(f: Formula, w: LassoWord, memo: dict) -> list[bool]:
    key = f
    if key in memo:
        return memo[key]
    n = w.positions()
    if isinstance(f, TrueF):
        t = [True] * n
    elif isinstance(f, Atom):
        t = [f.name in w.label(i) for i in range(n)]
    elif isinstance(f, Not):
        s = _eval_at(f.sub, w, memo)
        t = [not v for v in s]
    elif isinstance(f, And):
        a, b = _eval_at(f.left, w, memo), _eval_at(f.right, w, memo)
        t = [x and y for x, y in zip(a, b)]
    elif isinstance(f, Or):
        a, b = _eval_at(f.left, w, memo), _eval_at(f.right, w, memo)
        t = [x or y for x, y in zip(a, b)]
    elif isinstance(f, Next):
        s = _eval_at(f.sub, w, memo)
        t = [s[w.succ(i)] for i in range(n)]
    elif isinstance(f, BoundedEventually):
        s = _eval_at(f.sub, w, memo)
        t = []
        for i in range(n):
            j, hit = i, s[i]
            for _ in range(f.bound):
                if hit:
                    break
                j = w.succ(j)
                hit = s[j]
            t.append(hit)
    elif isinstance(f, (Until, Eventually)):
        if isinstance(f, Until):
            a = _eval_at(f.left, w, memo)
            b = _eval_at(f.right, w, memo)
        else:
            a = [True] * n
            b = _eval_at(f.sub, w, memo)
        t = [False] * n  # least fixed point
        for _ in range(n + 1):
            new = [b[i] or (a[i] and t[w.succ(i)]) for i in range(n)]
            if new == t:
                break
            t = new
    elif isinstance(f, Always):
        s = _eval_at(f.sub, w, memo)
        t = [True] * n  # greatest fixed point
        for _ in range(n + 1):
            new = [s[i] and t[w.succ(i)] for i in range(n)]
            if new == t:
                break
            t = new
    else:
        raise TypeError(f"not a formula: {f!r}")
    memo[key] = t
    return t
