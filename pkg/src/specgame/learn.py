"""Model-free minimax-Q on product games.

Turn-based self-play: both players follow epsilon-greedy strategies over a
shared table, the backup is a max at controller states, a min at attacker
states and the dummy-action value at chance states, with an exact
bootstrap of 1 at winning-sink states. The table update runs in the
compiled kernel when available.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernel
from .automata import Dra
from .game import ATT, CTRL, STOCH, StochasticGame
from .ltl import Formula
from .product import (
    CompiledProduct,
    ProductGame,
    ShapingParams,
    build_product,
    compile_product,
    gamma_b,
    gamma_c,
)


@dataclass(frozen=True)
class LearnConfig:
    episodes: int = 512_000
    steps_per_episode: int = 1000
    epsilon: tuple[float, float] = (0.5, 0.05)
    alpha: tuple[float, float] = (0.5, 0.05)
    gamma: float = 0.999
    gamma_curriculum_start: float | None = None
    exponent_b: float = 0.5
    exponent_c: float = 0.25
    seed: int = 0
    skip_detected_attacks: bool = False
    start_distribution: str = "uniform-product"
    curve_every: int = 0

    def __post_init__(self):
        if self.episodes < 0 or self.steps_per_episode < 0:
            raise ValueError("episode and step budgets must be non-negative")
        for name, (start, end) in (("epsilon", self.epsilon), ("alpha", self.alpha)):
            if not (0.0 < start <= 1.0 and 0.0 < end <= 1.0):
                raise ValueError(f"{name} schedule must stay in (0,1]")
            if end > start:
                raise ValueError(f"{name} schedule must be nonincreasing")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0,1)")
        if self.gamma_curriculum_start is not None and not (
            0.0 < self.gamma_curriculum_start < 1.0
        ):
            raise ValueError("gamma curriculum start must lie in (0,1)")
        if self.start_distribution not in ("uniform-product", "initial-dra-only"):
            raise ValueError(f"unknown start distribution {self.start_distribution!r}")

    def shaping(self) -> ShapingParams:
        return ShapingParams(self.gamma, self.exponent_b, self.exponent_c)


@dataclass
class QTable:
    """Learned state-action values over the compiled product."""

    data: np.ndarray  # float64[n, amax]
    cp: CompiledProduct
    pair: int
    curve: np.ndarray | None = None  # mean start-state value over training

    def value(self, state: int, slot: int) -> float:
        return float(self.data[state, slot])

    def state_value(self, state: int) -> float:
        """max/min/dummy backup value of a product state."""
        if self.cp.sink[state]:
            return 1.0
        own = self.cp.owner[state]
        na = int(self.cp.navail[state])
        row = self.data[state, :na]
        if own == STOCH:
            return float(row[0])
        return float(row.max() if own == CTRL else row.min())


@dataclass(frozen=True)
class FiniteMemoryStrategy:
    """Strategy with automaton states as memory modes."""

    dra: Dra = field(compare=False)
    role: str
    m0: int
    action_map: dict[tuple[int, int], int]  # (mode, base state) -> action index

    def action(self, mode: int, base: int) -> int:
        return self.action_map[(mode, base)]

    def step_mode(self, mode: int, word) -> int:
        for letter in word:
            mode = self.dra.step(mode, letter)
        return mode


def _schedules(cfg: LearnConfig):
    e = max(cfg.episodes, 1)
    eps = np.linspace(cfg.epsilon[0], cfg.epsilon[1], e)[: cfg.episodes]
    alpha = np.linspace(cfg.alpha[0], cfg.alpha[1], e)[: cfg.episodes]
    if cfg.gamma_curriculum_start is None:
        gamma = np.full(cfg.episodes, cfg.gamma)
    else:
        gamma = np.full(cfg.episodes, cfg.gamma)
        half = cfg.episodes // 2
        if half > 0:
            # geometric interpolation in 1-gamma over the first half
            t = np.linspace(0.0, 1.0, half)
            log_start = np.log1p(-cfg.gamma_curriculum_start)
            log_end = np.log1p(-cfg.gamma)
            gamma[:half] = 1.0 - np.exp(log_start + t * (log_end - log_start))
    params = cfg.shaping()
    gamma3 = np.empty((cfg.episodes, 3))
    gamma3[:, 0] = gamma
    gamma3[:, 1] = 1.0 - (1.0 - gamma) ** params.exponent_b
    gamma3[:, 2] = 1.0 - (1.0 - gamma) ** params.exponent_c
    return np.ascontiguousarray(eps), np.ascontiguousarray(alpha), np.ascontiguousarray(gamma3)


def start_states(pg: ProductGame, cfg: LearnConfig) -> np.ndarray:
    g, dra = pg.game, pg.dra
    ctrl_bases = [s for s in range(g.n_states) if g.owner[s] == CTRL]
    if cfg.start_distribution == "uniform-product":
        states = [
            pg.state_index(s, q) for s in ctrl_bases for q in range(dra.n_states)
        ]
    else:
        advance = bool(g.init_word)
        states = []
        for s in ctrl_bases:
            q = dra.step(dra.q0, g.labels[s]) if advance else dra.q0
            states.append(pg.state_index(s, q))
    return np.asarray(sorted(set(states)), dtype=np.int32)


def minimax_q(pg: ProductGame, pair: int, cfg: LearnConfig) -> QTable:
    """Tabular minimax-Q for the designated Rabin pair; bit-reproducible
    for a fixed (config, seed)."""
    if not (0 <= pair < len(pg.dra.pairs)):
        raise ValueError(f"pair index {pair} out of range")
    cp = compile_product(pg, pair, skip_detected_attacks=cfg.skip_detected_attacks)
    q = np.zeros((cp.owner.shape[0], cp.amax))
    eps, alpha, gamma3 = _schedules(cfg)
    starts = start_states(pg, cfg)
    n_curve = cfg.episodes // cfg.curve_every if cfg.curve_every > 0 else 0
    curve = np.zeros(max(n_curve, 1))
    kernel.train(
        cp.owner,
        cp.navail,
        cp.succ,
        cp.soff,
        cp.sdest,
        cp.scum,
        cp.cls,
        cp.sink,
        starts,
        eps,
        alpha,
        gamma3,
        cfg.steps_per_episode,
        cfg.seed & ((1 << 64) - 1),
        q,
        cfg.curve_every,
        curve,
    )
    if q.size and (q.min() < 0.0 or q.max() > 1.0 + 1e-12):
        raise ArithmeticError("Q estimates left [0,1]; shaping invariant broken")
    return QTable(data=q, cp=cp, pair=pair, curve=curve[:n_curve] if n_curve else None)


def _greedy(q: QTable, pg: ProductGame, role: str) -> FiniteMemoryStrategy:
    want_owner = CTRL if role == "controller" else ATT
    pick = np.argmax if role == "controller" else np.argmin
    cp = q.cp
    action_map: dict[tuple[int, int], int] = {}
    for base in range(pg.game.n_states):
        if pg.game.owner[base] != want_owner:
            continue
        for mode in range(pg.n_q):
            idx = pg.state_index(base, mode)
            na = int(cp.navail[idx])
            slot = int(pick(q.data[idx, :na]))  # ties break to the lowest index
            orig_slot = int(cp.slot_map[idx, slot])
            action_map[(mode, base)] = pg.game.avail[base][orig_slot]
    return FiniteMemoryStrategy(
        dra=pg.dra, role=role, m0=pg.q_init, action_map=action_map
    )


def greedy_controller(q: QTable, pg: ProductGame) -> FiniteMemoryStrategy:
    return _greedy(q, pg, "controller")


def greedy_attacker(q: QTable, pg: ProductGame) -> FiniteMemoryStrategy:
    return _greedy(q, pg, "attacker")


def multi_pair_learn(
    pg: ProductGame, cfg: LearnConfig
) -> tuple[FiniteMemoryStrategy, list[float]]:
    """Learn once per Rabin pair; each learned initial-state value is a
    lower bound on the satisfaction probability, and the strategy of the
    best pair (lowest index on ties) is returned."""
    values: list[float] = []
    tables: list[QTable] = []
    for pair in range(len(pg.dra.pairs)):
        q = minimax_q(pg, pair, cfg)
        tables.append(q)
        values.append(q.state_value(pg.s0))
    best = int(np.argmax(values))
    return greedy_controller(tables[best], pg), values


def algorithm1(
    phi_win: Formula | Dra, g: StochasticGame, cfg: LearnConfig
) -> FiniteMemoryStrategy:
    """Translate, compose, learn, extract: the full synthesis pipeline."""
    from .automata import translate_reachability

    dra = phi_win if isinstance(phi_win, Dra) else translate_reachability(phi_win)
    pg = build_product(g, dra)
    strategy, _values = multi_pair_learn(pg, cfg)
    return strategy
