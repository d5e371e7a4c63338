"""Pure-Python training loop, the fallback for the compiled kernel.

Must stay operation-for-operation identical to _qkernel.pyx: both walk the
same splitmix64 stream and apply IEEE double arithmetic in the same order,
so a fixed seed gives bit-identical Q tables on either backend.
"""

from __future__ import annotations

BACKEND = "python"

_MASK = (1 << 64) - 1
_INV53 = 1.0 / (1 << 53)


def train(
    owner,
    navail,
    succ,
    soff,
    sdest,
    scum,
    cls,
    sink,
    starts,
    eps_sched,
    alpha_sched,
    gamma3,
    steps,
    seed,
    q,
    curve_every,
    curve_out,
):
    n_starts = len(starts)
    episodes = len(eps_sched)
    state = seed & _MASK
    curve_k = 0

    def nxt():
        nonlocal state
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def unit():
        return (nxt() >> 11) * _INV53

    def value_of(s):
        if sink[s]:
            return 1.0
        own = owner[s]
        if own == 2:
            return q[s, 0]
        na = navail[s]
        best = q[s, 0]
        if own == 0:
            for j in range(1, na):
                v = q[s, j]
                if v > best:
                    best = v
        else:
            for j in range(1, na):
                v = q[s, j]
                if v < best:
                    best = v
        return best

    for e in range(episodes):
        eps = eps_sched[e]
        alpha = alpha_sched[e]
        g, gb, gc = gamma3[e, 0], gamma3[e, 1], gamma3[e, 2]
        s = starts[nxt() % n_starts]
        for _t in range(steps):
            if sink[s]:
                break
            own = owner[s]
            if own == 2:
                slot = 0
                u = unit()
                j = soff[s]
                hi = soff[s + 1]
                while j + 1 < hi and scum[j] <= u:
                    j += 1
                s2 = sdest[j]
            else:
                na = int(navail[s])
                if unit() < eps:
                    slot = nxt() % na
                else:
                    slot = 0
                    best = q[s, 0]
                    if own == 0:
                        for j in range(1, na):
                            v = q[s, j]
                            if v > best:
                                best = v
                                slot = j
                    else:
                        for j in range(1, na):
                            v = q[s, j]
                            if v < best:
                                best = v
                                slot = j
                s2 = succ[s, slot]
            c = cls[s]
            if c == 1:
                r = 1.0 - gb
                disc = gb
            elif c == 2:
                r = 0.0
                disc = gc
            else:
                r = 0.0
                disc = g
            target = r + disc * value_of(s2)
            q[s, slot] = (1.0 - alpha) * q[s, slot] + alpha * target
            s = s2
        if curve_every > 0 and (e + 1) % curve_every == 0:
            total = 0.0
            for i in range(n_starts):
                total += value_of(starts[i])
            curve_out[curve_k] = total / n_starts
            curve_k += 1
    return curve_k
