"""Product of a stochastic game with a deterministic Rabin automaton, and
the reward/discount shaping that turns Rabin acceptance into a discounted
return.

The shaping pays 1 - gamma_B on states of the designated B set and
discounts by gamma_B there, by gamma_C on the C set and by gamma
elsewhere; the schedules gamma_B = 1-(1-gamma)^b, gamma_C = 1-(1-gamma)^c
with 0 < c < b < 1 drive both required limit ratios to zero as gamma
approaches 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .automata import Dra, winning_sink_states
from .game import ATT, CTRL, STOCH, StochasticGame


@dataclass(frozen=True)
class ShapingParams:
    gamma: float
    exponent_b: float = 0.5
    exponent_c: float = 0.25

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0,1)")
        if not (0.0 < self.exponent_c < self.exponent_b < 1.0):
            raise ValueError("need 0 < exponent_c < exponent_b < 1")


def gamma_b(p: ShapingParams, gamma: float | None = None) -> float:
    g = p.gamma if gamma is None else gamma
    return 1.0 - (1.0 - g) ** p.exponent_b


def gamma_c(p: ShapingParams, gamma: float | None = None) -> float:
    g = p.gamma if gamma is None else gamma
    return 1.0 - (1.0 - g) ** p.exponent_c


def reward_value(in_b: bool, p: ShapingParams) -> float:
    return 1.0 - gamma_b(p) if in_b else 0.0


def discount_value(in_b: bool, in_c: bool, p: ShapingParams) -> float:
    if in_b and in_c:
        raise ValueError("state lies in both C and B of the designated pair")
    if in_b:
        return gamma_b(p)
    if in_c:
        return gamma_c(p)
    return p.gamma


@dataclass(frozen=True)
class ProductGame:
    game: StochasticGame
    dra: Dra
    # state index is base * |Q| + q
    n_states: int
    q_init: int

    @property
    def n_q(self) -> int:
        return self.dra.n_states

    def state_index(self, base: int, q: int) -> int:
        return base * self.n_q + q

    def split(self, idx: int) -> tuple[int, int]:
        return divmod(idx, self.n_q)

    @property
    def s0(self) -> int:
        return self.state_index(self.game.s0, self.q_init)

    def owner(self, idx: int) -> int:
        return self.game.owner[idx // self.n_q]

    def avail(self, idx: int) -> tuple[int, ...]:
        return self.game.avail[idx // self.n_q]

    def transitions(self, idx: int, slot: int):
        """(prob, dest index) entries for the slot-th available action."""
        base, q = self.split(idx)
        out = []
        for p, dest, word in self.game.trans[base][slot]:
            q2 = q
            for letter in word:
                q2 = self.dra.step(q2, letter)
            out.append((p, self.state_index(dest, q2)))
        return out

    def in_c(self, idx: int, pair: int) -> bool:
        return idx % self.n_q in self.dra.pairs[pair][0]

    def in_b(self, idx: int, pair: int) -> bool:
        return idx % self.n_q in self.dra.pairs[pair][1]

    def sink_q(self) -> frozenset[int]:
        return winning_sink_states(self.dra)

    def is_sink(self, idx: int) -> bool:
        return idx % self.n_q in self.sink_q()


def build_product(g: StochasticGame, a: Dra) -> ProductGame:
    """Full product over S x Q; the automaton coordinate advances by the
    letters carried on each game transition (the label-event words), and
    the initial coordinate is q0 advanced by the game's init word."""
    if not set(g.ap) <= set(a.ap):
        raise ValueError(
            f"game propositions {sorted(set(g.ap) - set(a.ap))} unknown to the automaton"
        )
    q = a.q0
    for letter in g.init_word:
        q = a.step(q, letter)
    return ProductGame(game=g, dra=a, n_states=g.n_states * a.n_states, q_init=q)


# ---------------------------------------------------------------------------
# Flat arrays for the learning kernel and the value-iteration oracle


@dataclass
class CompiledProduct:
    """Flattened product for the hot loops.

    Player states: succ[s, slot] holds the deterministic successor.
    Stochastic states: successors sdest[soff[s]:soff[s+1]] with cumulative
    probabilities scum over the same range.
    cls marks the designated-pair role (0 plain, 1 in B, 2 in C);
    sink marks states whose automaton coordinate is inside an absorbing
    accepting component (value exactly 1).
    """

    owner: np.ndarray  # int8[n]
    navail: np.ndarray  # int32[n]
    succ: np.ndarray  # int32[n, amax]
    soff: np.ndarray  # int64[n+1]
    sdest: np.ndarray  # int32[m]
    sprob: np.ndarray  # float64[m]
    scum: np.ndarray  # float64[m]
    cls: np.ndarray  # int8[n]
    sink: np.ndarray  # uint8[n]
    s0: int
    n_q: int
    amax: int
    # slot index (into the original avail list) behind each compiled slot;
    # identity unless the attacker skip rewrote a state's action set
    slot_map: np.ndarray  # int32[n, amax]


def compile_product(
    pg: ProductGame, pair: int, skip_detected_attacks: bool = False
) -> CompiledProduct:
    g, dra = pg.game, pg.dra
    n_q = pg.n_q
    n = pg.n_states
    c_set, b_set = dra.pairs[pair]
    overlap = c_set & b_set
    if overlap:
        raise ValueError(
            f"designated pair has overlapping C and B states {sorted(overlap)}"
        )
    sink_q = pg.sink_q()

    amax = max(len(av) for av in g.avail)
    owner = np.empty(n, dtype=np.int8)
    navail = np.zeros(n, dtype=np.int32)
    succ = np.full((n, amax), -1, dtype=np.int32)
    slot_map = np.full((n, amax), -1, dtype=np.int32)
    cls = np.zeros(n, dtype=np.int8)
    sink = np.zeros(n, dtype=np.uint8)
    soff = np.zeros(n + 1, dtype=np.int64)
    sdest_parts: list[int] = []
    sprob_parts: list[float] = []

    # destination product state per (base, slot, entry), resolved per q
    for base in range(g.n_states):
        own = g.owner[base]
        for q in range(n_q):
            idx = base * n_q + q
            owner[idx] = own
            if q in b_set:
                cls[idx] = 1
            elif q in c_set:
                cls[idx] = 2
            if q in sink_q:
                sink[idx] = 1

    def dest_index(base, q, slot):
        out = []
        for p, dest, word in g.trans[base][slot]:
            q2 = q
            for letter in word:
                q2 = dra.step(q2, letter)
            out.append((p, dest * n_q + q2))
        return out

    for base in range(g.n_states):
        own = g.owner[base]
        slots = list(range(len(g.avail[base])))
        for q in range(n_q):
            idx = base * n_q + q
            use = slots
            if (
                skip_detected_attacks
                and own == ATT
                and g.att_parent_action is not None
                and g.att_parent_action[base] >= 0
            ):
                parent = g.att_parent_action[base]
                if parent in g.avail[base]:
                    all_deviations_detected = True
                    for slot in slots:
                        if g.avail[base][slot] == parent:
                            parent_slot = slot
                            continue
                        for _p, d in dest_index(base, q, slot):
                            if not sink[d] and not _chance_all_sink(
                                pg, d, sink_q
                            ):
                                all_deviations_detected = False
                                break
                        if not all_deviations_detected:
                            break
                    if all_deviations_detected:
                        use = [parent_slot]
            navail[idx] = len(use)
            if own == STOCH:
                entries = dest_index(base, q, 0)
                soff[idx + 1] = len(entries)
                for p, d in entries:
                    sdest_parts.append(d)
                    sprob_parts.append(p)
                slot_map[idx, 0] = 0
            else:
                for j, slot in enumerate(use):
                    (p, d), = dest_index(base, q, slot)
                    succ[idx, j] = d
                    slot_map[idx, j] = slot

    soff = np.cumsum(soff)
    sdest = np.array(sdest_parts, dtype=np.int32)
    sprob = np.array(sprob_parts, dtype=np.float64)
    scum = sprob.copy()
    for s in range(n):
        lo, hi = soff[s], soff[s + 1]
        if hi > lo:
            scum[lo:hi] = np.cumsum(sprob[lo:hi])
            scum[hi - 1] = 1.0  # close the distribution against rounding
    return CompiledProduct(
        owner=owner,
        navail=navail,
        succ=succ,
        soff=soff,
        sdest=sdest,
        sprob=sprob,
        scum=scum,
        cls=cls,
        sink=sink,
        s0=pg.s0,
        n_q=n_q,
        amax=amax,
        slot_map=slot_map,
    )


def _chance_all_sink(pg: ProductGame, idx: int, sink_q) -> bool:
    """True when every probabilistic outcome of a chance state lands on a
    sink coordinate (a deviation that is certainly detected)."""
    base, q = pg.split(idx)
    if pg.game.owner[base] != STOCH:
        return False
    for _p, dest in pg.transitions(idx, 0):
        if dest % pg.n_q not in sink_q:
            return False
    return True


def shaping_tables(
    cp: CompiledProduct, params: ShapingParams, gamma: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-state reward and discount vectors for the designated pair."""
    g = params.gamma if gamma is None else gamma
    gb = gamma_b(params, g)
    gc = gamma_c(params, g)
    reward = np.where(cp.cls == 1, 1.0 - gb, 0.0)
    discount = np.where(cp.cls == 1, gb, np.where(cp.cls == 2, gc, g))
    return reward, discount
