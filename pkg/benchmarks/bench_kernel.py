"""Throughput comparison of the compiled and pure-Python training kernels.

Runs the same seeded minimax-Q budget on the bundled patrol instance with
each backend, reports steps per second, and checks that the resulting Q
tables are byte-identical.

Usage: python3 benchmarks/bench_kernel.py [--episodes N] [--steps N]
"""

from __future__ import annotations

import argparse
import time
from importlib.resources import files

import numpy as np

from specgame import _qkernel_py
from specgame.automata import dra_union, parse_hoa, translate_reachability
from specgame.game import build_grid_game, load_grid
from specgame.learn import LearnConfig, _schedules, start_states
from specgame.ltl import build_ids
from specgame.product import build_product, compile_product

try:
    from specgame import _qkernel
except ImportError:
    _qkernel = None


def build_instance():
    fixtures = files("specgame") / "fixtures"
    spec = load_grid((fixtures / "surveillance.grid").read_text())
    g = build_grid_game(spec, start=(3, 1))
    ids = translate_reachability(build_ids(0, 1, extended=True))
    task = parse_hoa((fixtures / "task_surveillance.hoa").read_text())
    return build_product(g, dra_union(ids, task))


def run(backend, cp, cfg, starts, eps, alpha, gamma3):
    q = np.zeros((cp.owner.shape[0], cp.amax))
    curve = np.zeros(1)
    t0 = time.perf_counter()
    backend.train(
        cp.owner, cp.navail, cp.succ, cp.soff, cp.sdest, cp.scum,
        cp.cls, cp.sink, starts, eps, alpha, gamma3,
        cfg.steps_per_episode, cfg.seed & ((1 << 64) - 1), q, 0, curve,
    )
    return q, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=4000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pair", type=int, default=1)
    args = ap.parse_args()

    pg = build_instance()
    cfg = LearnConfig(
        episodes=args.episodes,
        steps_per_episode=args.steps,
        gamma=0.999,
        seed=args.seed,
    )
    cp = compile_product(pg, args.pair, skip_detected_attacks=True)
    eps, alpha, gamma3 = _schedules(cfg)
    starts = start_states(pg, cfg)
    budget = args.episodes * args.steps
    print(f"instance: {pg.n_states} product states, budget {budget} steps")

    backends = [("python", _qkernel_py)]
    if _qkernel is not None:
        backends.insert(0, ("cython", _qkernel))
    else:
        print("compiled kernel unavailable; timing the fallback only")

    results = {}
    for name, mod in backends:
        q, dt = run(mod, cp, cfg, starts, eps, alpha, gamma3)
        results[name] = q
        print(f"{name:>7}: {dt:8.3f} s   {budget / dt / 1e6:8.2f} M steps/s")

    if len(results) == 2:
        same = results["cython"].tobytes() == results["python"].tobytes()
        print("Q tables byte-identical:", same)
        if not same:
            raise SystemExit(1)


if __name__ == "__main__":
    main()
