import random

import pytest

from specgame.ltl import (
    ANOMALY,
    ATTACK,
    Always,
    And,
    Atom,
    BoundedEventually,
    Eventually,
    FALSE,
    Formula,
    LassoWord,
    LtlSyntaxError,
    Next,
    Not,
    Or,
    TRUE,
    Until,
    build_alarm,
    build_detect,
    build_ids,
    build_win,
    eval_lasso,
    expand_sugar,
    format_ltl,
    parse_ltl,
)


def lw(stem, loop):
    return LassoWord.of(stem, loop)


class TestParse:
    def test_surveillance_task(self):
        f = parse_ltl("G F b & G F c & F G d")
        expected = And(
            And(Always(Eventually(Atom("b"))), Always(Eventually(Atom("c")))),
            Eventually(Always(Atom("d"))),
        )
        assert f == expected

    def test_until_binds_tighter_than_and(self):
        assert parse_ltl("a U b & c") == And(Until(Atom("a"), Atom("b")), Atom("c"))

    def test_until_right_associative(self):
        assert parse_ltl("a U b U c") == Until(Atom("a"), Until(Atom("b"), Atom("c")))

    def test_bounded_eventually(self):
        f = parse_ltl("F (anomaly & X F<=1 attack)")
        assert f == Eventually(And(ANOMALY, Next(BoundedEventually(1, ATTACK))))

    def test_constants(self):
        assert parse_ltl("true") == TRUE
        assert parse_ltl("false") == FALSE

    def test_syntax_error_reports_position(self):
        with pytest.raises(LtlSyntaxError) as exc:
            parse_ltl("a & )")
        assert exc.value.position == 4

    def test_unknown_token(self):
        with pytest.raises(LtlSyntaxError):
            parse_ltl("a @ b")

    def test_negative_bound(self):
        with pytest.raises(LtlSyntaxError):
            parse_ltl("F<=-2 a")

    def test_trailing_input(self):
        with pytest.raises(LtlSyntaxError):
            parse_ltl("a b")


class TestFormat:
    @pytest.mark.parametrize(
        "f,text",
        [
            (Atom("b"), "b"),
            (Always(Eventually(Atom("b"))), "G F b"),
            (BoundedEventually(2, Atom("a")), "F<=2 a"),
        ],
    )
    def test_examples(self, f, text):
        assert format_ltl(f) == text

    def test_roundtrip_random(self):
        rng = random.Random(20240917)
        for _ in range(1000):
            f = random_formula(rng, depth=6)
            assert parse_ltl(format_ltl(f)) == f


class TestExpandSugar:
    def test_bounded_two(self):
        a = Atom("a")
        assert expand_sugar(BoundedEventually(2, a)) == Or(
            Or(a, Next(a)), Next(Next(a))
        )

    def test_bounded_zero_collapses(self):
        assert expand_sugar(BoundedEventually(0, Atom("a"))) == Atom("a")

    def test_always_definitional(self):
        d = Atom("d")
        assert expand_sugar(Always(d)) == Not(Until(TRUE, Not(d)))

    def test_soundness_random(self):
        rng = random.Random(7)
        for _ in range(500):
            f = random_formula(rng, depth=4)
            w = random_lasso(rng)
            assert eval_lasso(f, w) == eval_lasso(expand_sugar(f), w)

    def test_duality_random(self):
        rng = random.Random(8)
        for _ in range(200):
            g = random_formula(rng, depth=3)
            w = random_lasso(rng)
            assert eval_lasso(Always(g), w) == eval_lasso(
                Not(Eventually(Not(g))), w
            )


class TestBuilders:
    def test_alarm_single_zero_window(self):
        assert build_alarm([0]) == Eventually(And(ANOMALY, Next(ANOMALY)))

    def test_alarm_single_window(self):
        assert build_alarm([3]) == Eventually(
            And(ANOMALY, Next(BoundedEventually(3, ANOMALY)))
        )

    def test_alarm_nested(self):
        assert build_alarm([2, 1]) == Eventually(
            And(
                ANOMALY,
                Next(
                    BoundedEventually(
                        2, And(ANOMALY, Next(BoundedEventually(1, ANOMALY)))
                    )
                ),
            )
        )

    def test_alarm_empty_rejected(self):
        with pytest.raises(ValueError):
            build_alarm([])

    @pytest.mark.parametrize(
        "n,expected",
        [
            (1, BoundedEventually(1, ATTACK)),
            (0, ATTACK),
            (3, BoundedEventually(3, ATTACK)),
        ],
    )
    def test_detect(self, n, expected):
        assert build_detect(n) == expected

    def test_ids_extended_case_study(self):
        # the m=0, n=1 extended template used throughout the experiments
        f = build_ids(0, 1, extended=True)
        expected = Eventually(
            And(
                ANOMALY,
                Next(
                    And(
                        ANOMALY,
                        Next(
                            BoundedEventually(
                                1, And(ATTACK, Next(Eventually(ATTACK)))
                            )
                        ),
                    )
                ),
            )
        )
        assert f == expected

    def test_ids_plain(self):
        assert build_ids(1, 0) == Eventually(
            And(
                ANOMALY,
                Next(BoundedEventually(1, And(ANOMALY, Next(ATTACK)))),
            )
        )

    def test_ids_text_roundtrip(self):
        f = build_ids(0, 1, extended=True)
        assert parse_ltl(format_ltl(f)) == f

    def test_win(self):
        ids = build_ids(0, 1, extended=True)
        task = parse_ltl("G F b & G F c & F G d")
        assert build_win(ids, task) == Or(ids, task)

    def test_win_with_false_is_task_equivalent(self):
        rng = random.Random(9)
        task = parse_ltl("G F b")
        f = build_win(FALSE, task)
        for _ in range(50):
            w = random_lasso(rng)
            assert eval_lasso(f, w) == eval_lasso(task, w)

    def test_win_with_true(self):
        rng = random.Random(10)
        f = build_win(Atom("x"), TRUE)
        for _ in range(20):
            assert eval_lasso(f, random_lasso(rng))


class TestEvalLasso:
    def test_recurrence(self):
        assert eval_lasso(parse_ltl("G F b"), lw([], [{"b"}, {}]))

    def test_persistence_fails(self):
        assert not eval_lasso(parse_ltl("F G d"), lw([{"d"}], [{}]))

    def test_alarm_on_consecutive_anomalies(self):
        w = lw([{"anomaly"}, {}, {"anomaly"}, {"anomaly"}], [{}])
        assert eval_lasso(build_alarm([0]), w)

    def test_alarm_needs_window(self):
        w = lw([{"anomaly"}, {}, {"anomaly"}], [{}])
        assert not eval_lasso(build_alarm([0]), w)
        assert eval_lasso(build_alarm([1]), w)

    def test_until_semantics(self):
        f = parse_ltl("a U b")
        assert eval_lasso(f, lw([{"a"}, {"a"}, {"b"}], [{}]))
        assert not eval_lasso(f, lw([{"a"}, {}, {"b"}], [{}]))

    def test_unmentioned_atoms_false(self):
        assert not eval_lasso(Atom("zzz"), lw([], [{"b"}]))

    def test_empty_loop_rejected(self):
        with pytest.raises(ValueError):
            LassoWord.of([], [])

    def test_monotone_detect_windows(self):
        # F<=n covers the n+1 positions starting now, so widening the
        # window can only add satisfying words
        rng = random.Random(11)
        for _ in range(200):
            w = random_lasso(rng, props=("attack",))
            n = rng.randrange(0, 4)
            if eval_lasso(build_detect(n), w):
                assert eval_lasso(build_detect(n + 1), w)


# ---------------------------------------------------------------------------
# random generators shared by several test classes

_PROPS = ("a", "b", "c", "d")


def random_formula(rng: random.Random, depth: int) -> Formula:
    if depth == 0 or rng.random() < 0.3:
        return rng.choice([TRUE, Atom(rng.choice(_PROPS))])
    kind = rng.randrange(8)
    if kind == 0:
        return Not(random_formula(rng, depth - 1))
    if kind == 1:
        return And(random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    if kind == 2:
        return Or(random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    if kind == 3:
        return Next(random_formula(rng, depth - 1))
    if kind == 4:
        return Until(random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    if kind == 5:
        return Always(random_formula(rng, depth - 1))
    if kind == 6:
        return Eventually(random_formula(rng, depth - 1))
    return BoundedEventually(rng.randrange(0, 4), random_formula(rng, depth - 1))


def random_lasso(rng: random.Random, props=_PROPS) -> LassoWord:
    def letters(k):
        return [
            {p for p in props if rng.random() < 0.4} for _ in range(k)
        ]

    return LassoWord.of(letters(rng.randrange(0, 4)), letters(rng.randrange(1, 4)))
