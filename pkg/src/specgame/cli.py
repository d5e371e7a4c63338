"""Command-line front end.

Subcommands: parse, translate, product, learn, evaluate. All exports are
plain text or CSV and are deterministic for a fixed (config, seed).

Exit codes: 0 success, 1 user or validation error, 2 I/O error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import os
import pathlib
import sys
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .automata import (
    Dra,
    FragmentError,
    HoaError,
    dra_union,
    parse_hoa,
    translate_reachability,
    write_hoa,
)
from .game import (
    ACTIONS,
    ATT,
    CTRL,
    GridError,
    GridSpec,
    StochasticGame,
    build_grid_game,
    load_grid,
)
from .learn import (
    FiniteMemoryStrategy,
    LearnConfig,
    QTable,
    greedy_attacker,
    greedy_controller,
    minimax_q,
)
from .ltl import LtlSyntaxError, build_ids, format_ltl, parse_ltl
from .product import ProductGame, ShapingParams, build_product, compile_product
from .verify import best_response_value, induced_mc, rabin_sat_prob, value_iteration

# learn budgets above this many kernel steps require the explicit --full flag
FULL_GATE_STEPS = 50_000_000

ORACLE_STATE_LIMIT = 500_000

QTABLE_MAGIC = "specgame-qtable v1"
STRATEGY_MAGIC = "specgame-strategy v1"


class CliError(Exception):
    """User-facing validation error (exit code 1)."""


@dataclass(frozen=True)
class RunConfig:
    grid: pathlib.Path
    task_hoa: pathlib.Path | None
    task_ltl: str | None
    ids_m: int
    ids_n: int
    extended: bool
    start: tuple[int, int]
    learn: LearnConfig
    out: pathlib.Path


def _seed_default() -> int:
    env = os.environ.get("SPECGAME_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"SPECGAME_SEED must be an integer, got {env!r}") from None


def _parse_schedule(text: str) -> tuple[float, float]:
    try:
        start, end = (float(x) for x in text.split(":"))
    except ValueError:
        raise CliError(f"schedule must look like START:END, got {text!r}") from None
    return start, end


def _load_run_document(path: pathlib.Path) -> dict:
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError:
        raise
    except yaml.YAMLError as exc:
        raise CliError(f"unparseable run config: {exc}") from None
    if not isinstance(doc, dict):
        raise CliError("run config must be a mapping")
    return doc


def build_run_config(args) -> RunConfig:
    doc: dict = {}
    base = pathlib.Path(".")
    if args.config:
        cfg_path = pathlib.Path(args.config)
        doc = _load_run_document(cfg_path)
        base = cfg_path.parent

    def pick(flag, key, default):
        if flag is not None:
            return flag
        if key in doc:
            return doc[key]
        return default

    grid = pick(args.grid, "grid", None)
    if grid is None:
        raise CliError("a grid is required (--grid or config field 'grid')")
    task_hoa = pick(getattr(args, "task", None), "task", None)
    task_ltl = pick(getattr(args, "task_ltl", None), "task_ltl", None)
    if (task_hoa is None) == (task_ltl is None):
        raise CliError("exactly one of --task and --task-ltl is required")

    ids_doc = doc.get("ids", {})
    ids_m = int(pick(args.ids_m, "_", ids_doc.get("m", 0)))
    ids_n = int(pick(args.ids_n, "_", ids_doc.get("n", 1)))
    extended = bool(pick(args.extended or None, "_", ids_doc.get("extended", False)))

    start_doc = pick(getattr(args, "start", None), "start", (0, 0))
    if isinstance(start_doc, str):
        try:
            r, c = (int(x) for x in start_doc.split(","))
        except ValueError:
            raise CliError(f"start must look like ROW,COL, got {start_doc!r}") from None
        start = (r, c)
    else:
        start = (int(start_doc[0]), int(start_doc[1]))

    eps = args.epsilon or doc.get("epsilon", (0.5, 0.05))
    alpha = args.alpha or doc.get("alpha", (0.5, 0.05))
    if isinstance(eps, str):
        eps = _parse_schedule(eps)
    if isinstance(alpha, str):
        alpha = _parse_schedule(alpha)

    seed = args.seed if args.seed is not None else doc.get("seed", _seed_default())
    gamma_curr = (
        args.gamma_curriculum
        if args.gamma_curriculum is not None
        else doc.get("gamma_curriculum")
    )
    try:
        learn = LearnConfig(
            episodes=int(pick(args.episodes, "episodes", 10_000)),
            steps_per_episode=int(pick(args.steps, "steps", 100)),
            epsilon=(float(eps[0]), float(eps[1])),
            alpha=(float(alpha[0]), float(alpha[1])),
            gamma=float(pick(args.gamma, "gamma", 0.999)),
            gamma_curriculum_start=float(gamma_curr) if gamma_curr is not None else None,
            seed=int(seed),
            skip_detected_attacks=bool(
                pick(args.skip_detected_attacks or None, "skip_detected_attacks", False)
            ),
            start_distribution=pick(args.start_dist, "start_dist", "uniform-product"),
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None

    out = pathlib.Path(pick(getattr(args, "out", None), "out", "out"))
    return RunConfig(
        grid=base / grid if not pathlib.Path(grid).is_absolute() else pathlib.Path(grid),
        task_hoa=(
            (base / task_hoa if not pathlib.Path(task_hoa).is_absolute() else pathlib.Path(task_hoa))
            if task_hoa
            else None
        ),
        task_ltl=task_ltl,
        ids_m=ids_m,
        ids_n=ids_n,
        extended=extended,
        start=start,
        learn=learn,
        out=out,
    )


def load_task_dra(cfg: RunConfig) -> Dra:
    if cfg.task_hoa is not None:
        return parse_hoa(cfg.task_hoa.read_text())
    return translate_reachability(parse_ltl(cfg.task_ltl))


def build_win_dra(cfg: RunConfig) -> Dra:
    """Union of the detection automaton and the task automaton; detection
    pairs come first."""
    ids = translate_reachability(build_ids(cfg.ids_m, cfg.ids_n, cfg.extended))
    return dra_union(ids, load_task_dra(cfg))


def build_instances(cfg: RunConfig) -> tuple[GridSpec, StochasticGame, Dra, ProductGame]:
    spec = load_grid(cfg.grid.read_text())
    g = build_grid_game(spec, start=cfg.start)
    dra = build_win_dra(cfg)
    return spec, g, dra, build_product(g, dra)


# ---------------------------------------------------------------------------
# Artifact formats


def dump_qtable(path: pathlib.Path, q: QTable, values: list[float]) -> None:
    lines = [
        QTABLE_MAGIC,
        f"pair {q.pair}",
        f"states {q.data.shape[0]} modes {q.cp.n_q} actions {q.cp.amax}",
        "pair-values " + " ".join(repr(v) for v in values),
    ]
    for s in range(q.data.shape[0]):
        row = " ".join(repr(float(x)) for x in q.data[s])
        lines.append(f"{s} {row}")
    path.write_text("\n".join(lines) + "\n")


def read_qtable(path: pathlib.Path) -> tuple[int, np.ndarray]:
    lines = path.read_text().splitlines()
    if not lines or lines[0] != QTABLE_MAGIC:
        raise CliError(f"{path} is not a q-table artifact")
    pair = int(lines[1].split()[1])
    meta = lines[2].split()
    n, amax = int(meta[1]), int(meta[5])
    data = np.zeros((n, amax))
    for ln in lines[4:]:
        parts = ln.split()
        data[int(parts[0])] = [float(x) for x in parts[1:]]
    return pair, data


def dump_strategy(path: pathlib.Path, strat: FiniteMemoryStrategy) -> None:
    lines = [
        STRATEGY_MAGIC,
        f"role {strat.role}",
        f"m0 {strat.m0}",
    ]
    for (mode, base), action in sorted(strat.action_map.items()):
        lines.append(f"{mode} {base} {ACTIONS[action] if action < len(ACTIONS) else action}")
    path.write_text("\n".join(lines) + "\n")


def read_strategy(path: pathlib.Path, dra: Dra) -> FiniteMemoryStrategy:
    lines = path.read_text().splitlines()
    if not lines or lines[0] != STRATEGY_MAGIC:
        raise CliError(f"{path} is not a strategy artifact")
    role = lines[1].split()[1]
    m0 = int(lines[2].split()[1])
    amap = {}
    for ln in lines[3:]:
        mode, base, action = ln.split()
        amap[(int(mode), int(base))] = ACTIONS.index(action)
    return FiniteMemoryStrategy(dra=dra, role=role, m0=m0, action_map=amap)


def dump_curve(path: pathlib.Path, every: int, curve: np.ndarray | None) -> None:
    lines = ["episode,mean_start_value"]
    if curve is not None:
        for i, v in enumerate(curve):
            lines.append(f"{(i + 1) * every},{float(v)!r}")
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Commands


def cmd_parse(args) -> int:
    print(format_ltl(parse_ltl(args.formula)))
    return 0


def cmd_translate(args) -> int:
    if args.formula is not None:
        f = parse_ltl(args.formula)
    elif args.ids_m is not None or args.ids_n is not None:
        f = build_ids(args.ids_m or 0, args.ids_n or 0, args.extended)
    else:
        raise CliError("nothing to translate: give a formula or --ids-m/--ids-n")
    text = write_hoa(translate_reachability(f))
    if args.out:
        pathlib.Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_product(args) -> int:
    cfg = build_run_config(args)
    spec, g, dra, pg = build_instances(cfg)
    if args.ids_hoa:
        ids = parse_hoa(pathlib.Path(args.ids_hoa).read_text())
        dra = dra_union(ids, load_task_dra(cfg))
        pg = build_product(g, dra)
    n_ctrl = sum(o == CTRL for o in g.owner)
    n_att = sum(o == ATT for o in g.owner)
    counts = {
        "controller": n_ctrl,
        "attacker": n_att,
        "stochastic": g.n_states - n_ctrl - n_att,
    }
    print(f"grid {spec.rows}x{spec.cols}")
    print(
        "game states "
        f"{g.n_states} (controller {counts['controller']}, "
        f"attacker {counts['attacker']}, stochastic {counts['stochastic']})"
    )
    print(f"automaton states {dra.n_states} pairs {len(dra.pairs)}")
    print(f"product states {pg.n_states}")
    return 0


def run_learn_once(cfg: RunConfig, out: pathlib.Path) -> None:
    _spec, g, dra, pg = build_instances(cfg)
    every = max(cfg.learn.episodes // 100, 1)
    lcfg = replace(cfg.learn, curve_every=every)
    values: list[float] = []
    tables: list[QTable] = []
    for pair in range(len(dra.pairs)):
        q = minimax_q(pg, pair, lcfg)
        tables.append(q)
        values.append(q.state_value(pg.s0))
    best = int(np.argmax(values))
    qt = tables[best]
    out.mkdir(parents=True, exist_ok=True)
    dump_qtable(out / "qtable.txt", qt, values)
    dump_strategy(out / "controller.strategy", greedy_controller(qt, pg))
    dump_strategy(out / "attacker.strategy", greedy_attacker(qt, pg))
    dump_curve(out / "learning_curve.csv", every, qt.curve)


def cmd_learn(args) -> int:
    cfg = build_run_config(args)
    budget = cfg.learn.episodes * cfg.learn.steps_per_episode
    if budget > FULL_GATE_STEPS and not args.full:
        raise CliError(
            f"budget of {budget} kernel steps needs the explicit --full flag"
        )
    runs = 1 if args.runs is None else args.runs
    if runs < 1:
        raise CliError("--runs must be positive")
    if runs == 1:
        run_learn_once(cfg, cfg.out)
    else:
        for i in range(runs):
            sub = replace(cfg, learn=replace(cfg.learn, seed=cfg.learn.seed + i))
            run_learn_once(sub, cfg.out / f"run_{i}")
    return 0


def _reachable_ctrl(pg: ProductGame):
    """Forward closure from the initial product state; controller states
    only, in deterministic order."""
    seen = {pg.s0}
    frontier = [pg.s0]
    while frontier:
        idx = frontier.pop()
        base = idx // pg.n_q
        for slot in range(len(pg.game.avail[base])):
            for _p, dest in pg.transitions(idx, slot):
                if dest not in seen:
                    seen.add(dest)
                    frontier.append(dest)
    return sorted(s for s in seen if pg.owner(s) == CTRL)


def cmd_evaluate(args) -> int:
    cfg = build_run_config(args)
    spec, g, dra, pg = build_instances(cfg)
    out = cfg.out
    qpath = out / "qtable.txt"
    cpath = out / "controller.strategy"
    apath = out / "attacker.strategy"
    for p in (qpath, cpath, apath):
        if not p.exists():
            raise CliError(f"missing artifact {p}; run the learn command first")
    pair, data = read_qtable(qpath)
    cp = compile_product(pg, pair, skip_detected_attacks=cfg.learn.skip_detected_attacks)
    if data.shape != (pg.n_states, cp.amax):
        raise CliError("q-table artifact does not match this configuration")
    qt = QTable(data=data, cp=cp, pair=pair)
    mu = read_strategy(cpath, dra)
    nu = read_strategy(apath, dra)

    reach = _reachable_ctrl(pg)
    heat = ["row,col,dra_mode,value"]
    arrows = ["row,col,dra_mode,controller_action,attacker_action"]
    for idx in reach:
        base, q = pg.split(idx)
        r, c = divmod(base, spec.cols)
        heat.append(f"{r},{c},{q},{qt.state_value(idx)!r}")
        ca = mu.action(q, base)
        # the attacker reacts at the (cell, chosen action) state, same mode
        n_cells = spec.rows * spec.cols
        att_state = n_cells + base * len(ACTIONS) + ca
        aa = nu.action(q, att_state)
        arrows.append(f"{r},{c},{q},{ACTIONS[ca]},{ACTIONS[aa]}")
    (out / "heatmap.csv").write_text("\n".join(heat) + "\n")
    (out / "arrows.csv").write_text("\n".join(arrows) + "\n")

    if args.oracle:
        report = [f"designated pair {pair}"]
        if pg.n_states > ORACLE_STATE_LIMIT:
            report.append(
                f"oracles skipped: {pg.n_states} product states exceed the "
                f"limit of {ORACLE_STATE_LIMIT}"
            )
        else:
            params = ShapingParams(cfg.learn.gamma)
            tol = float(args.tol)
            V = value_iteration(pg, pair, params, tol=tol)
            B = best_response_value(pg, pair, params, mu, tol=tol)
            mc = induced_mc(g, dra, mu, nu)
            sat = rabin_sat_prob(mc)
            report.append(f"value-iteration initial value {float(V[pg.s0])!r}")
            report.append(f"best-response initial value {float(B[pg.s0])!r}")
            report.append(f"learned initial value {qt.state_value(pg.s0)!r}")
            report.append(f"induced-chain acceptance probability {sat!r}")
        (out / "oracle_report.txt").write_text("\n".join(report) + "\n")
        for line in report:
            print(line)
    return 0


# ---------------------------------------------------------------------------


def _add_model_flags(p: argparse.ArgumentParser, with_learn: bool = True) -> None:
    p.add_argument("--config", help="run configuration document")
    p.add_argument("--grid", help="grid description file")
    p.add_argument("--task", help="task automaton in HOA format")
    p.add_argument("--task-ltl", dest="task_ltl", help="inline reachability task formula")
    p.add_argument("--ids-m", dest="ids_m", type=int, help="alarm window")
    p.add_argument("--ids-n", dest="ids_n", type=int, help="detection window")
    p.add_argument("--extended", action="store_true", help="extended detection template")
    p.add_argument("--start", help="start cell ROW,COL")
    p.add_argument("--out", help="artifact directory")
    if with_learn:
        p.add_argument("--episodes", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--gamma", type=float)
        p.add_argument("--gamma-curriculum", dest="gamma_curriculum", type=float)
        p.add_argument("--epsilon", help="schedule START:END")
        p.add_argument("--alpha", help="schedule START:END")
        p.add_argument("--seed", type=int)
        p.add_argument(
            "--skip-detected-attacks", dest="skip_detected_attacks", action="store_true"
        )
        p.add_argument(
            "--start-dist",
            dest="start_dist",
            choices=("uniform-product", "initial-dra-only"),
        )


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specgame",
        description="Security-aware controller synthesis under stealthy actuation attacks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="normalize a formula")
    p.add_argument("formula")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("translate", help="translate a reachability formula to HOA")
    p.add_argument("formula", nargs="?")
    p.add_argument("--ids-m", dest="ids_m", type=int)
    p.add_argument("--ids-n", dest="ids_n", type=int)
    p.add_argument("--extended", action="store_true")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("product", help="report composition sizes")
    _add_model_flags(p)
    p.add_argument("--ids-hoa", dest="ids_hoa", help="pre-translated detection automaton")
    p.set_defaults(func=cmd_product)

    p = sub.add_parser("learn", help="train strategies and write artifacts")
    _add_model_flags(p)
    p.add_argument("--full", action="store_true", help="allow full-experiment training budgets")
    p.add_argument("--runs", type=int, help="independent seeded runs")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("evaluate", help="export figure data and oracle reports")
    _add_model_flags(p)
    p.add_argument("--oracle", action="store_true", help="run model-based oracles")
    p.add_argument("--tol", default="1e-6", help="oracle value-iteration tolerance")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, LtlSyntaxError, FragmentError, HoaError, GridError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
