"""Turn-based stochastic games and the adversarial grid world.

The grid game has one controller state per cell, one attacker state per
(cell, controller action) and one stochastic state per (cell, controller
action, attacker action). Attack and anomaly observations, together with
the destination cell labels, are emitted as a single letter on the
stochastic transition instead of materializing dummy states; the automaton
composed with the game consumes that letter when the move resolves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

CTRL, ATT, STOCH = 0, 1, 2

ACTIONS = ("North", "South", "East", "West")
_DELTA = {0: (-1, 0), 1: (1, 0), 2: (0, 1), 3: (0, -1)}
# perpendicular slip directions for each action
_SIDES = {0: (2, 3), 1: (2, 3), 2: (0, 1), 3: (0, 1)}

Cell = tuple[int, int]
Word = tuple[frozenset[str], ...]
Transition = tuple[float, int, Word]


class GridError(ValueError):
    """Invalid grid description."""


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    ap: tuple[str, ...]
    cell_labels: dict[Cell, frozenset[str]]
    p_intended: float = 0.8
    p_side: float = 0.1

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise GridError("grid must have positive dimensions")
        if abs(self.p_intended + 2 * self.p_side - 1.0) > 1e-9:
            raise GridError(
                f"p_intended + 2*p_side must be 1, got "
                f"{self.p_intended + 2 * self.p_side}"
            )
        if not (0 <= self.p_side <= 0.5 and 0 < self.p_intended <= 1):
            raise GridError("probabilities out of range")
        for cell, labels in self.cell_labels.items():
            if not self.in_bounds(cell):
                raise GridError(f"labeled cell {cell} out of bounds")
            extra = labels - set(self.ap)
            if extra:
                raise GridError(f"labels {sorted(extra)} not declared in ap")

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols

    def labels(self, cell: Cell) -> frozenset[str]:
        return self.cell_labels.get(cell, frozenset())


def expected_cell(spec: GridSpec, cell: Cell, action: int) -> Cell:
    """Neighbor in the action direction, clamped at the boundary."""
    if not spec.in_bounds(cell):
        raise GridError(f"cell {cell} out of bounds")
    dr, dc = _DELTA[action]
    nxt = (cell[0] + dr, cell[1] + dc)
    return nxt if spec.in_bounds(nxt) else cell


def transition_distribution(spec: GridSpec, cell: Cell, executed_action: int) -> dict[Cell, float]:
    """Destination distribution for the executed action; wall-clamped
    outcomes landing on the same cell are merged."""
    dist: dict[Cell, float] = {}
    moves = [(executed_action, spec.p_intended)]
    for side in _SIDES[executed_action]:
        moves.append((side, spec.p_side))
    for a, p in moves:
        if p == 0.0:
            continue
        dest = expected_cell(spec, cell, a)
        dist[dest] = dist.get(dest, 0.0) + p
    return dist


@dataclass(frozen=True)
class StepOutcome:
    next_cell: Cell
    label_word: Word  # (attack event, anomaly event, destination labels)


def step_sample(spec: GridSpec, cell: Cell, a_ctrl: int, a_att: int, rng) -> StepOutcome:
    """Sample one full turn; rng is any object with a random() method."""
    dist = transition_distribution(spec, cell, a_att)
    u = rng.random()
    acc = 0.0
    dest = None
    for d, p in dist.items():
        acc += p
        if u < acc:
            dest = d
            break
    if dest is None:  # guard against accumulated rounding
        dest = d
    attack = frozenset({"attack"}) if a_att != a_ctrl else frozenset()
    anomaly = (
        frozenset({"anomaly"})
        if dest != expected_cell(spec, cell, a_ctrl)
        else frozenset()
    )
    return StepOutcome(dest, (attack, anomaly, spec.labels(dest)))


@dataclass(frozen=True)
class StochasticGame:
    """Turn-based game; trans[s][i] lists (prob, dest, word) entries for the
    i-th available action, where word holds the letters an observer
    consumes along that transition."""

    owner: tuple[int, ...]
    actions: tuple[str, ...]
    avail: tuple[tuple[int, ...], ...]
    trans: tuple[tuple[tuple[Transition, ...], ...], ...]
    s0: int
    ap: tuple[str, ...]
    labels: tuple[frozenset[str], ...]
    init_word: Word = ()
    state_names: tuple[str, ...] | None = field(default=None, compare=False)
    # for attacker states that mirror a controller decision: the action the
    # controller picked upstream (used by the detected-attack skip)
    att_parent_action: tuple[int, ...] | None = field(default=None, compare=False)

    @property
    def n_states(self) -> int:
        return len(self.owner)

    def validate(self, atol: float = 1e-12) -> None:
        for s in range(self.n_states):
            if self.owner[s] == STOCH and len(self.avail[s]) != 1:
                raise ValueError(f"stochastic state {s} must have one dummy action")
            for i, _a in enumerate(self.avail[s]):
                entries = self.trans[s][i]
                total = sum(p for p, _, _ in entries)
                if abs(total - 1.0) > atol:
                    raise ValueError(f"distribution at state {s} sums to {total}")
                if self.owner[s] != STOCH:
                    if len(entries) != 1 or entries[0][0] != 1.0:
                        raise ValueError(
                            f"player state {s} must have point-mass transitions"
                        )


def from_state_labels(
    owner, actions, avail, succ, s0, ap, labels, state_names=None
) -> StochasticGame:
    """Build a game where each transition consumes the label of its source
    state, the plain composition convention for games without mid-step
    events. succ[s][i] is either a dest index (player states) or a list of
    (prob, dest) pairs (stochastic states)."""
    labels = tuple(frozenset(x) for x in labels)
    trans = []
    for s in range(len(owner)):
        word = (labels[s],)
        per_action = []
        for i in range(len(avail[s])):
            entry = succ[s][i]
            if isinstance(entry, int):
                per_action.append(((1.0, entry, word),))
            else:
                per_action.append(tuple((p, d, word) for p, d in entry))
        trans.append(tuple(per_action))
    return StochasticGame(
        owner=tuple(owner),
        actions=tuple(actions),
        avail=tuple(tuple(a) for a in avail),
        trans=tuple(trans),
        s0=s0,
        ap=tuple(ap),
        labels=labels,
        init_word=(),
        state_names=tuple(state_names) if state_names else None,
    )


def build_grid_game(spec: GridSpec, start: Cell = (0, 0)) -> StochasticGame:
    """Expand a grid into the turn-based game with label-event words."""
    if not spec.in_bounds(start):
        raise GridError(f"start cell {start} out of bounds")
    n_cells = spec.rows * spec.cols
    n_act = len(ACTIONS)

    def cell_id(cell: Cell) -> int:
        return cell[0] * spec.cols + cell[1]

    def att_id(cell: Cell, ac: int) -> int:
        return n_cells + cell_id(cell) * n_act + ac

    def stoch_id(cell: Cell, ac: int, aa: int) -> int:
        return n_cells * (1 + n_act) + (cell_id(cell) * n_act + ac) * n_act + aa

    n = n_cells * (1 + n_act + n_act * n_act)
    owner = [CTRL] * n_cells + [ATT] * (n_cells * n_act) + [STOCH] * (n_cells * n_act * n_act)
    labels: list[frozenset[str]] = [frozenset()] * n
    avail: list[tuple[int, ...]] = [()] * n
    trans: list = [()] * n
    names: list[str] = [""] * n
    att_parent = [-1] * n

    all_actions = tuple(range(n_act))
    for r in range(spec.rows):
        for c in range(spec.cols):
            cell = (r, c)
            s = cell_id(cell)
            labels[s] = spec.labels(cell)
            avail[s] = all_actions
            names[s] = f"cell {r} {c}"
            trans[s] = tuple(((1.0, att_id(cell, ac), ()),) for ac in all_actions)
            for ac in all_actions:
                t = att_id(cell, ac)
                avail[t] = all_actions
                names[t] = f"att {r} {c} {ACTIONS[ac]}"
                att_parent[t] = ac
                trans[t] = tuple(((1.0, stoch_id(cell, ac, aa), ()),) for aa in all_actions)
                expected = expected_cell(spec, cell, ac)
                for aa in all_actions:
                    p_state = stoch_id(cell, ac, aa)
                    attack = frozenset({"attack"}) if aa != ac else frozenset()
                    labels[p_state] = attack
                    avail[p_state] = (0,)
                    names[p_state] = f"chance {r} {c} {ACTIONS[ac]} {ACTIONS[aa]}"
                    entries = []
                    for dest, p in sorted(transition_distribution(spec, cell, aa).items()):
                        anomaly = frozenset({"anomaly"}) if dest != expected else frozenset()
                        letter = attack | anomaly | spec.labels(dest)
                        entries.append((p, cell_id(dest), (letter,)))
                    trans[p_state] = (tuple(entries),)

    ap = spec.ap + tuple(p for p in ("anomaly", "attack") if p not in spec.ap)
    return StochasticGame(
        owner=tuple(owner),
        actions=ACTIONS,
        avail=tuple(avail),
        trans=tuple(trans),
        s0=cell_id(start),
        ap=ap,
        labels=tuple(labels),
        init_word=(spec.labels(start),),
        state_names=tuple(names),
        att_parent_action=tuple(att_parent),
    )


def load_grid(text: str) -> GridSpec:
    """Parse a grid description document (YAML mapping)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise GridError(f"unparseable grid document: {exc}") from exc
    if not isinstance(doc, dict):
        raise GridError("grid document must be a mapping")
    required = {"rows", "cols", "ap", "labels", "p_intended", "p_side"}
    missing = required - doc.keys()
    if missing:
        raise GridError(f"missing grid fields: {sorted(missing)}")
    cell_labels: dict[Cell, frozenset[str]] = {}
    for key, props in (doc["labels"] or {}).items():
        try:
            r, c = (int(x) for x in str(key).split(","))
        except ValueError:
            raise GridError(f"bad cell key {key!r}, expected 'row,col'") from None
        cell_labels[(r, c)] = frozenset(props or ())
    return GridSpec(
        rows=int(doc["rows"]),
        cols=int(doc["cols"]),
        ap=tuple(doc["ap"]),
        cell_labels=cell_labels,
        p_intended=float(doc["p_intended"]),
        p_side=float(doc["p_side"]),
    )
