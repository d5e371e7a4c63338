import os
import random
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_tiny_product
from specgame.automata import dra_union, translate_reachability
from specgame.game import ACTIONS, CTRL, GridSpec, STOCH, build_grid_game, from_state_labels
from specgame.ltl import build_ids, parse_ltl
from specgame.learn import (
    LearnConfig,
    algorithm1,
    greedy_attacker,
    greedy_controller,
    minimax_q,
    multi_pair_learn,
    start_states,
    _schedules,
)
from specgame.product import ShapingParams, build_product, shaping_tables
from specgame.verify import value_iteration

EAST = ACTIONS.index("East")


def reachable_states(pg):
    """Forward closure from every uniform-product episode start."""
    seen = set()
    frontier = [
        pg.state_index(s, q)
        for s in range(pg.game.n_states)
        if pg.game.owner[s] == CTRL
        for q in range(pg.n_q)
    ]
    seen.update(frontier)
    while frontier:
        idx = frontier.pop()
        base = idx // pg.n_q
        for slot in range(len(pg.game.avail[base])):
            for _p, dest in pg.transitions(idx, slot):
                if dest not in seen:
                    seen.add(dest)
                    frontier.append(dest)
    return sorted(seen)


def fast_cfg(**kw):
    base = dict(
        episodes=4000,
        steps_per_episode=40,
        gamma=0.99,
        epsilon=(0.5, 0.1),
        alpha=(0.5, 0.01),
        seed=11,
    )
    base.update(kw)
    return LearnConfig(**base)


class TestLearnConfig:
    def test_defaults_are_full_experiment_budget(self):
        cfg = LearnConfig()
        assert cfg.episodes == 512_000
        assert cfg.steps_per_episode == 1000
        assert cfg.gamma == 0.999
        assert cfg.epsilon == (0.5, 0.05) and cfg.alpha == (0.5, 0.05)

    @pytest.mark.parametrize(
        "kw",
        [
            {"episodes": -1},
            {"epsilon": (0.05, 0.5)},
            {"alpha": (0.0, 0.0)},
            {"gamma": 1.0},
            {"gamma_curriculum_start": 0.0},
            {"start_distribution": "everywhere"},
        ],
    )
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            LearnConfig(**kw)

    def test_schedules_linear(self):
        cfg = fast_cfg(episodes=5)
        eps, alpha, gamma3 = _schedules(cfg)
        assert eps[0] == 0.5 and eps[-1] == pytest.approx(0.1)
        assert np.allclose(np.diff(eps), np.diff(eps)[0])
        assert np.all(gamma3[:, 0] == 0.99)

    def test_gamma_curriculum_reaches_target(self):
        cfg = fast_cfg(episodes=100, gamma_curriculum_start=0.9)
        _, _, gamma3 = _schedules(cfg)
        assert gamma3[0, 0] == pytest.approx(0.9, abs=1e-9)
        assert np.all(gamma3[50:, 0] == 0.99)
        assert np.all(np.diff(gamma3[:50, 0]) > 0)
        p = cfg.shaping()
        assert np.allclose(gamma3[:, 1], 1 - (1 - gamma3[:, 0]) ** p.exponent_b)


class TestMinimaxQ:
    def test_two_cell_bootstrap(self):
        # North from cell 0 reaches an all-B sink deterministically
        g = from_state_labels(
            owner=[CTRL, CTRL],
            actions=["North", "South"],
            avail=[(0, 1), (0,)],
            succ=[[1, 0], [1]],
            s0=0,
            ap=("g",),
            labels=[set(), {"g"}],
        )
        dra = translate_reachability(parse_ltl("F g"))
        pg = build_product(g, dra)
        cfg = fast_cfg(episodes=10_000, steps_per_episode=20)
        qt = minimax_q(pg, 0, cfg)
        assert qt.value(pg.s0, 0) == pytest.approx(0.99, abs=0.02)

    def test_zero_budget_all_zero(self):
        rng = random.Random(50)
        pg = random_tiny_product(rng)
        qt = minimax_q(pg, 0, fast_cfg(episodes=0))
        assert np.all(qt.data == 0.0)

    def test_oracle_convergence(self):
        rng = random.Random(60)
        pg = random_tiny_product(rng, max_product_states=18)
        cfg = fast_cfg(episodes=40_000)
        qt = minimax_q(pg, 0, cfg)
        V = value_iteration(pg, 0, ShapingParams(0.99), tol=1e-10)
        R, G = shaping_tables(qt.cp, ShapingParams(0.99))
        worst = 0.0
        for s in reachable_states(pg):
            if qt.cp.sink[s]:
                continue
            if qt.cp.owner[s] == STOCH:
                lo, hi = qt.cp.soff[s], qt.cp.soff[s + 1]
                ref = R[s] + G[s] * float(
                    np.dot(qt.cp.sprob[lo:hi], V[qt.cp.sdest[lo:hi]])
                )
                worst = max(worst, abs(qt.value(s, 0) - ref))
            else:
                for slot in range(int(qt.cp.navail[s])):
                    ref = R[s] + G[s] * V[qt.cp.succ[s, slot]]
                    worst = max(worst, abs(qt.value(s, slot) - ref))
        assert worst <= 0.05

    def test_determinism(self):
        rng = random.Random(70)
        pg = random_tiny_product(rng)
        cfg = fast_cfg(episodes=2000)
        a = minimax_q(pg, 0, cfg)
        b = minimax_q(pg, 0, cfg)
        assert np.array_equal(a.data, b.data)

    def test_bounded(self):
        rng = random.Random(80)
        for _ in range(5):
            pg = random_tiny_product(rng)
            qt = minimax_q(pg, 0, fast_cfg(episodes=3000))
            assert qt.data.min() >= 0.0 and qt.data.max() <= 1.0 + 1e-12

    def test_sink_value_exact(self):
        rng = random.Random(90)
        while True:
            pg = random_tiny_product(rng)
            sinks = [s for s in range(pg.n_states) if pg.is_sink(s)]
            if sinks:
                break
        qt = minimax_q(pg, 0, fast_cfg(episodes=2000))
        for s in sinks:
            assert qt.state_value(s) == 1.0

    def test_bad_pair_index(self):
        rng = random.Random(91)
        pg = random_tiny_product(rng)
        with pytest.raises(ValueError):
            minimax_q(pg, 5, fast_cfg())

    def test_learning_curve_shape(self):
        rng = random.Random(92)
        pg = random_tiny_product(rng)
        qt = minimax_q(pg, 0, fast_cfg(episodes=1000, curve_every=100))
        assert qt.curve is not None and qt.curve.shape == (10,)
        assert np.all((qt.curve >= 0) & (qt.curve <= 1))


class TestBackends:
    def test_bit_identical_q_tables(self, tmp_path):
        code = (
            "import numpy as np, random, sys\n"
            "sys.path.insert(0, {tests!r})\n"
            "from conftest import random_tiny_product\n"
            "from specgame.learn import LearnConfig, minimax_q\n"
            "import specgame.kernel as K\n"
            "pg = random_tiny_product(random.Random(123))\n"
            "qt = minimax_q(pg, 0, LearnConfig(episodes=3000, steps_per_episode=30,"
            " gamma=0.97, epsilon=(0.5, 0.1), alpha=(0.5, 0.05), seed=9))\n"
            "np.save(sys.argv[1], qt.data)\n"
            "print(K.BACKEND)\n"
        ).format(tests=os.path.dirname(__file__))
        outs = {}
        for name, extra in (("compiled", {}), ("python", {"SPECGAME_FORCE_PY": "1"})):
            out = tmp_path / f"{name}.npy"
            env = dict(os.environ, **extra)
            proc = subprocess.run(
                [sys.executable, "-c", code, str(out)],
                env=env,
                capture_output=True,
                text=True,
                check=True,
            )
            outs[name] = (np.load(out), proc.stdout.strip())
        assert outs["python"][1] == "python"
        assert np.array_equal(outs["compiled"][0], outs["python"][0])


class TestGreedy:
    def test_tie_breaks_to_first_action(self):
        rng = random.Random(100)
        pg = random_tiny_product(rng)
        qt = minimax_q(pg, 0, fast_cfg(episodes=0))
        mu = greedy_controller(qt, pg)
        for (q, s), action in mu.action_map.items():
            assert action == pg.game.avail[s][0]

    def test_roles_cover_their_owner(self):
        rng = random.Random(101)
        pg = random_tiny_product(rng)
        qt = minimax_q(pg, 0, fast_cfg(episodes=500))
        mu = greedy_controller(qt, pg)
        nu = greedy_attacker(qt, pg)
        for s in range(pg.game.n_states):
            for q in range(pg.n_q):
                if pg.game.owner[s] == CTRL:
                    assert (q, s) in mu.action_map
                else:
                    assert (q, s) not in mu.action_map
        assert all(pg.game.owner[s] != CTRL for (_q, s) in nu.action_map)

    def test_mode_stepping(self):
        rng = random.Random(102)
        pg = random_tiny_product(rng)
        qt = minimax_q(pg, 0, fast_cfg(episodes=0))
        mu = greedy_controller(qt, pg)
        word = (frozenset({"a"}), frozenset())
        q = mu.step_mode(mu.m0, word)
        want = pg.dra.step(pg.dra.step(mu.m0, word[0]), word[1])
        assert q == want


class TestMultiPair:
    def test_single_pair_matches_minimax_q(self):
        rng = random.Random(110)
        pg = random_tiny_product(rng)
        cfg = fast_cfg(episodes=1500)
        strat, values = multi_pair_learn(pg, cfg)
        qt = minimax_q(pg, 0, cfg)
        assert values == [qt.state_value(pg.s0)]
        assert strat.action_map == greedy_controller(qt, pg).action_map

    def test_selects_achievable_pair(self):
        # two pairs without any absorbing winning region: pair 0 demands an
        # unreachable state infinitely often, pair 1 a recurrent g; only
        # pair 1 accrues value, so its strategy must be selected
        from specgame.automata import Dra

        u = Dra(
            ap=("g",),
            delta=((0, 1), (0, 1)),
            q0=0,
            pairs=(
                (frozenset(), frozenset()),
                (frozenset(), frozenset({1})),
            ),
        )
        g = from_state_labels(
            owner=[CTRL, CTRL],
            actions=["go"],
            avail=[(0,), (0,)],
            succ=[[1], [0]],
            s0=0,
            ap=("g",),
            labels=[set(), {"g"}],
        )
        pg = build_product(g, u)
        cfg = fast_cfg(episodes=4000, steps_per_episode=15)
        _strat, values = multi_pair_learn(pg, cfg)
        assert values[1] > 0.5 and values[0] == 0.0


class TestStartStates:
    def grid_product(self):
        spec = GridSpec(rows=2, cols=2, ap=("b",), cell_labels={(1, 1): frozenset({"b"})})
        g = build_grid_game(spec, start=(0, 0))
        u = dra_union(
            translate_reachability(parse_ltl("F b")),
            translate_reachability(build_ids(0, 0)),
        )
        return build_product(g, u)

    def test_uniform_product_covers_all_modes(self):
        pg = self.grid_product()
        starts = start_states(pg, fast_cfg(start_distribution="uniform-product"))
        n_ctrl = sum(o == CTRL for o in pg.game.owner)
        assert len(starts) == n_ctrl * pg.n_q

    def test_initial_dra_only_advances_cell_label(self):
        pg = self.grid_product()
        starts = start_states(pg, fast_cfg(start_distribution="initial-dra-only"))
        n_ctrl = sum(o == CTRL for o in pg.game.owner)
        assert len(starts) <= n_ctrl
        for idx in starts:
            base, q = pg.split(int(idx))
            assert q == pg.dra.step(pg.dra.q0, pg.game.labels[base])


class TestAlgorithm1:
    def test_one_by_two_grid(self):
        spec = GridSpec(rows=1, cols=2, ap=("goal",), cell_labels={(0, 1): frozenset({"goal"})})
        g = build_grid_game(spec, start=(0, 0))
        # detection of any replacement counts as a win, so the attacker
        # cannot profitably block the goal
        phi = parse_ltl("F goal | F attack | (false & anomaly)")
        cfg = fast_cfg(episodes=6000, steps_per_episode=20)
        strat = algorithm1(phi, g, cfg)
        # the controller heads East toward the goal from the start mode
        assert strat.action_map[(strat.m0, g.s0)] == EAST

    def test_unparseable_condition_propagates(self):
        spec = GridSpec(rows=1, cols=2, ap=(), cell_labels={})
        g = build_grid_game(spec)
        from specgame.automata import FragmentError

        with pytest.raises(FragmentError):
            algorithm1(parse_ltl("G anomaly"), g, fast_cfg(episodes=10))
