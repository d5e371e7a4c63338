"""Model-based ground truth for the learner.

Exact discounted minimax value iteration, induced Markov chains with
Rabin-acceptance probabilities via bottom strongly connected components,
brute-force maximin on tiny instances, and closed-form statistics of the
sliding-window intrusion detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iproduct

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .automata import Dra
from .game import ATT, CTRL, STOCH, GridSpec, StochasticGame, expected_cell, transition_distribution
from .learn import FiniteMemoryStrategy
from .product import (
    CompiledProduct,
    ProductGame,
    ShapingParams,
    build_product,
    compile_product,
    shaping_tables,
)


@dataclass
class MarkovChain:
    """Finite chain with per-state Rabin-pair membership annotations."""

    P: np.ndarray  # row-stochastic
    init: int
    pair_membership: tuple[tuple[tuple[bool, bool], ...], ...]  # [state][pair] -> (in C, in B)
    keys: tuple  # state descriptions, e.g. (base state, mode)

    def __post_init__(self):
        rows = self.P.sum(axis=1)
        if not np.allclose(rows, 1.0, atol=1e-12):
            raise ValueError("chain rows must sum to 1")

    @property
    def n_states(self) -> int:
        return self.P.shape[0]


def _initial_mode(g: StochasticGame, dra: Dra) -> int:
    q = dra.q0
    for letter in g.init_word:
        q = dra.step(q, letter)
    return q


def _slot_of(g: StochasticGame, base: int, action: int) -> int:
    try:
        return g.avail[base].index(action)
    except ValueError:
        raise ValueError(
            f"action {action} unavailable at state {base}"
        ) from None


def induced_mc(
    g: StochasticGame,
    dra: Dra,
    mu: FiniteMemoryStrategy,
    nu: FiniteMemoryStrategy,
) -> MarkovChain:
    """Chain over reachable (state, mode) pairs with both players resolved."""
    start = (g.s0, _initial_mode(g, dra))
    index: dict[tuple[int, int], int] = {start: 0}
    order = [start]
    rows: list[list[tuple[int, float]]] = []
    i = 0
    while i < len(order):
        base, q = order[i]
        own = g.owner[base]
        if own == STOCH:
            slot = 0
        else:
            strat = mu if own == CTRL else nu
            try:
                action = strat.action(q, base)
            except KeyError:
                raise ValueError(
                    f"strategy undefined at reachable state {base} in mode {q}"
                ) from None
            slot = _slot_of(g, base, action)
        row: dict[tuple[int, int], float] = {}
        for p, dest, word in g.trans[base][slot]:
            q2 = q
            for letter in word:
                q2 = dra.step(q2, letter)
            key = (dest, q2)
            row[key] = row.get(key, 0.0) + p
        entries = []
        for key, p in row.items():
            if key not in index:
                index[key] = len(order)
                order.append(key)
            entries.append((index[key], p))
        rows.append(entries)
        i += 1
    n = len(order)
    P = np.zeros((n, n))
    for s, entries in enumerate(rows):
        for j, p in entries:
            P[s, j] = p
    membership = tuple(
        tuple((q in c, q in b) for c, b in dra.pairs) for (_s, q) in order
    )
    return MarkovChain(P=P, init=0, pair_membership=membership, keys=tuple(order))


def _bsccs(P: np.ndarray) -> list[list[int]]:
    n = P.shape[0]
    graph = csr_matrix(P > 0)
    n_comp, comp = connected_components(graph, directed=True, connection="strong")
    members: list[list[int]] = [[] for _ in range(n_comp)]
    for s in range(n):
        members[comp[s]].append(s)
    bottom = []
    src, dst = (P > 0).nonzero()
    leaves = set()
    for a, b in zip(src, dst):
        if comp[a] != comp[b]:
            leaves.add(comp[a])
    for cid in range(n_comp):
        if cid not in leaves:
            bottom.append(members[cid])
    return bottom


def _reach_probability(P: np.ndarray, init: int, target: set[int]) -> float:
    """Probability of reaching the target set, by direct linear solve."""
    n = P.shape[0]
    if init in target:
        return 1.0
    # states with no path to the target have probability 0
    can_reach = set(target)
    changed = True
    support = P > 0
    while changed:
        changed = False
        for s in range(n):
            if s in can_reach:
                continue
            if any(support[s, t] for t in can_reach):
                can_reach.add(s)
                changed = True
    unknown = sorted(can_reach - target)
    if init not in can_reach:
        return 0.0
    pos = {s: i for i, s in enumerate(unknown)}
    m = len(unknown)
    A = np.eye(m)
    rhs = np.zeros(m)
    for s in unknown:
        for t in range(n):
            p = P[s, t]
            if p == 0.0:
                continue
            if t in target:
                rhs[pos[s]] += p
            elif t in pos:
                A[pos[s], pos[t]] -= p
    x = np.linalg.solve(A, rhs)
    residual = np.abs(A @ x - rhs).max()
    if residual > 1e-10:
        raise ArithmeticError(f"linear solve residual {residual} too large")
    return float(x[pos[init]])


def rabin_sat_prob(mc: MarkovChain, pairs: list[int] | None = None) -> float:
    """Probability that a sampled path satisfies the Rabin condition:
    reach probability of the union of accepting BSCCs."""
    n_pairs = len(mc.pair_membership[0]) if mc.n_states else 0
    use = range(n_pairs) if pairs is None else pairs
    target: set[int] = set()
    for bscc in _bsccs(mc.P):
        for i in use:
            if not any(mc.pair_membership[s][i][0] for s in bscc) and any(
                mc.pair_membership[s][i][1] for s in bscc
            ):
                target.update(bscc)
                break
    if not target:
        return 0.0
    # the linear solve can overshoot [0,1] by a few ulps
    return min(max(_reach_probability(mc.P, mc.init, target), 0.0), 1.0)


# ---------------------------------------------------------------------------
# Discounted value iteration on the product

ValueMap = np.ndarray


def _sweep_tables(cp: CompiledProduct):
    n = cp.owner.shape[0]
    ctrl = np.flatnonzero(cp.owner == CTRL)
    att = np.flatnonzero(cp.owner == ATT)
    stoch = np.flatnonzero(cp.owner == STOCH)
    succ_pad = np.where(cp.succ >= 0, cp.succ, 0)
    pad = cp.succ < 0
    seg = np.repeat(np.arange(n), np.diff(cp.soff))
    return ctrl, att, stoch, succ_pad, pad, seg


def _iterate(
    cp: CompiledProduct,
    R: np.ndarray,
    G: np.ndarray,
    tol: float,
    frozen_ctrl_succ: np.ndarray | None = None,
) -> ValueMap:
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = cp.owner.shape[0]
    ctrl, att, stoch, succ_pad, pad, seg = _sweep_tables(cp)
    sink = cp.sink.astype(bool)
    V = np.zeros(n)
    V[sink] = 1.0
    gmax = float(G.max()) if n else 0.0
    cap = int(math.log(max(tol, 1e-300)) / math.log(gmax)) * 3 + 1000 if gmax < 1 else 10**6
    for _ in range(cap):
        W = V[succ_pad]
        Wmax = np.where(pad, -np.inf, W)
        Wmin = np.where(pad, np.inf, W)
        new = V.copy()
        if frozen_ctrl_succ is None:
            new[ctrl] = R[ctrl] + G[ctrl] * Wmax[ctrl].max(axis=1)
        else:
            new[ctrl] = R[ctrl] + G[ctrl] * V[frozen_ctrl_succ[ctrl]]
        new[att] = R[att] + G[att] * Wmin[att].min(axis=1)
        if stoch.size:
            expect = np.bincount(seg, weights=cp.sprob * V[cp.sdest], minlength=n)
            new[stoch] = R[stoch] + G[stoch] * expect[stoch]
        new[sink] = 1.0
        diff = np.abs(new - V).max()
        V = new
        if diff < tol:
            return V
    raise ArithmeticError("value iteration failed to converge within the sweep cap")


def value_iteration(
    pg: ProductGame, pair: int, params: ShapingParams, tol: float = 1e-9
) -> ValueMap:
    """Exact fixed point of the shaped minimax Bellman operator; winning
    sinks are pinned at 1."""
    cp = compile_product(pg, pair)
    R, G = shaping_tables(cp, params)
    return _iterate(cp, R, G, tol)


def best_response_value(
    pg: ProductGame,
    pair: int,
    params: ShapingParams,
    fixed_mu: FiniteMemoryStrategy,
    tol: float = 1e-9,
) -> ValueMap:
    """Attacker's discounted best response against a frozen controller."""
    cp = compile_product(pg, pair)
    g = pg.game
    n = pg.n_states
    frozen = np.zeros(n, dtype=np.int64)
    for base in range(g.n_states):
        if g.owner[base] != CTRL:
            continue
        for q in range(pg.n_q):
            idx = pg.state_index(base, q)
            try:
                action = fixed_mu.action(q, base)
            except KeyError:
                raise ValueError(
                    f"fixed controller undefined at state {base} mode {q}"
                ) from None
            slot = _slot_of(g, base, action)
            frozen[idx] = cp.succ[idx, slot]
    R, G = shaping_tables(cp, params)
    return _iterate(cp, R, G, tol, frozen_ctrl_succ=frozen)


# ---------------------------------------------------------------------------
# Brute-force maximin on tiny instances


def brute_force_maximin(g: StochasticGame, dra: Dra, limit: int = 30) -> float:
    """Enumerate all pure memoryless product strategies of both players and
    take the max over controller of the min over attacker satisfaction
    probability."""
    pg = build_product(g, dra)
    # reachable product states under any strategies
    reach = {pg.s0}
    frontier = [pg.s0]
    while frontier:
        idx = frontier.pop()
        base, _q = pg.split(idx)
        for slot in range(len(g.avail[base])):
            for _p, dest in pg.transitions(idx, slot):
                if dest not in reach:
                    reach.add(dest)
                    frontier.append(dest)
    if len(reach) > limit:
        raise ValueError(f"{len(reach)} reachable product states exceed limit {limit}")
    reach_sorted = sorted(reach)
    ctrl_states = [i for i in reach_sorted if pg.owner(i) == CTRL]
    att_states = [i for i in reach_sorted if pg.owner(i) == ATT]

    trans_cache = {
        (idx, slot): pg.transitions(idx, slot)
        for idx in reach_sorted
        for slot in range(len(g.avail[idx // pg.n_q]))
    }
    membership = {
        idx: tuple(
            (idx % pg.n_q in c, idx % pg.n_q in b) for c, b in dra.pairs
        )
        for idx in reach_sorted
    }

    def evaluate(mu_choice: dict[int, int], nu_choice: dict[int, int]) -> float:
        index = {pg.s0: 0}
        order = [pg.s0]
        rows = []
        i = 0
        while i < len(order):
            idx = order[i]
            own = pg.owner(idx)
            slot = mu_choice.get(idx, 0) if own == CTRL else (
                nu_choice.get(idx, 0) if own == ATT else 0
            )
            entries = {}
            for p, dest in trans_cache[(idx, slot)]:
                entries[dest] = entries.get(dest, 0.0) + p
            row = []
            for dest, p in entries.items():
                if dest not in index:
                    index[dest] = len(order)
                    order.append(dest)
                row.append((index[dest], p))
            rows.append(row)
            i += 1
        n = len(order)
        P = np.zeros((n, n))
        for s, row in enumerate(rows):
            for j, p in row:
                P[s, j] = p
        mc = MarkovChain(
            P=P,
            init=0,
            pair_membership=tuple(membership[idx] for idx in order),
            keys=tuple(order),
        )
        return rabin_sat_prob(mc)

    def assignments(states):
        slot_lists = [range(len(g.avail[i // pg.n_q])) for i in states]
        for combo in iproduct(*slot_lists):
            yield dict(zip(states, combo))

    best = 0.0
    for mu_choice in assignments(ctrl_states):
        worst = 1.0
        for nu_choice in assignments(att_states):
            worst = min(worst, evaluate(mu_choice, nu_choice))
            if worst <= best:
                break  # cannot beat the current maximin
        best = max(best, worst)
    return best


# ---------------------------------------------------------------------------
# Sliding-window detector statistics


def window_ids_analytics(
    p_eps: float, window: int, threshold: int
) -> tuple[float, float]:
    """(per-window alarm probability, expected steps to first alarm).

    The alarm probability is the exact binomial tail P(count > threshold in
    `window` trials). The expected first-alarm step is the mean absorption
    time of the sliding-window chain over recent-anomaly histories,
    counting the step on which the count first exceeds the threshold.
    """
    if not (0.0 <= p_eps <= 1.0):
        raise ValueError("p_eps must be a probability")
    if window < 1 or threshold < 0:
        raise ValueError("window must be >= 1 and threshold >= 0")
    if window > 20:
        raise ValueError("window sizes above 20 are not supported")

    alarm = sum(
        math.comb(window, i) * p_eps**i * (1.0 - p_eps) ** (window - i)
        for i in range(threshold + 1, window + 1)
    )

    if p_eps == 0.0 or alarm == 0.0:
        return alarm, math.inf

    # histories are the last window-1 outcomes, most recent last
    h_len = window - 1
    n = 1 << h_len
    idx = {h: i for i, h in enumerate(range(n))}

    def shift(h: int, x: int) -> int:
        if h_len == 0:
            return 0
        return ((h << 1) | x) & (n - 1)

    A = np.eye(n)
    rhs = np.ones(n)
    for h in range(n):
        count = bin(h).count("1")
        for x, p in ((1, p_eps), (0, 1.0 - p_eps)):
            if p == 0.0:
                continue
            if count + x > threshold:
                continue  # absorbed: alarm on this step
            A[idx[h], idx[shift(h, x)]] -= p
    expected = np.linalg.solve(A, rhs)
    return alarm, float(expected[0])


# ---------------------------------------------------------------------------
# Forced-execution scenarios on grids


def executed_run_hit_prob(
    spec: GridSpec,
    start: tuple[int, int],
    executed_actions: list[int],
    targets: set[tuple[int, int]],
) -> float:
    """Probability that a run under the given executed actions visits a
    target cell at some point, start included."""
    if start in targets:
        return 1.0
    dist = {start: 1.0}
    hit = 0.0
    for action in executed_actions:
        nxt: dict[tuple[int, int], float] = {}
        for cell, p in dist.items():
            for dest, q in transition_distribution(spec, cell, action).items():
                mass = p * q
                if dest in targets:
                    hit += mass
                else:
                    nxt[dest] = nxt.get(dest, 0.0) + mass
        dist = nxt
    return hit
