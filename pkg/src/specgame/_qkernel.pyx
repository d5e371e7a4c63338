# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled training loop; operation-for-operation twin of _qkernel_py."""

import numpy as np
cimport numpy as cnp

BACKEND = "cython"

cdef extern from *:
    """
    typedef unsigned long long u64;
    static inline u64 sg_mix(u64 *state) {
        u64 z;
        *state += 0x9E3779B97F4A7C15ULL;
        z = *state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    """
    ctypedef unsigned long long u64
    u64 sg_mix(u64 *state) nogil


cdef inline double _unit(u64 *state) nogil:
    return (sg_mix(state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline double _value_of(
    long s,
    signed char[::1] owner,
    int[::1] navail,
    unsigned char[::1] sink,
    double[:, ::1] q,
) nogil:
    cdef long j
    cdef int na
    cdef double best, v
    if sink[s]:
        return 1.0
    if owner[s] == 2:
        return q[s, 0]
    na = navail[s]
    best = q[s, 0]
    if owner[s] == 0:
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


def train(
    signed char[::1] owner,
    int[::1] navail,
    int[:, ::1] succ,
    long long[::1] soff,
    int[::1] sdest,
    double[::1] scum,
    signed char[::1] cls,
    unsigned char[::1] sink,
    int[::1] starts,
    double[::1] eps_sched,
    double[::1] alpha_sched,
    double[:, ::1] gamma3,
    long steps,
    unsigned long long seed,
    double[:, ::1] q,
    long curve_every,
    double[::1] curve_out,
):
    cdef long n_starts = starts.shape[0]
    cdef long episodes = eps_sched.shape[0]
    cdef u64 state = seed
    cdef long curve_k = 0
    cdef long e, t, s, s2, j, hi, i
    cdef int na, slot, own
    cdef signed char c
    cdef double eps, alpha, g, gb, gc, u, best, v, r, disc, target, total

    with nogil:
        for e in range(episodes):
            eps = eps_sched[e]
            alpha = alpha_sched[e]
            g = gamma3[e, 0]
            gb = gamma3[e, 1]
            gc = gamma3[e, 2]
            s = starts[sg_mix(&state) % <u64>n_starts]
            for t in range(steps):
                if sink[s]:
                    break
                own = owner[s]
                if own == 2:
                    slot = 0
                    u = _unit(&state)
                    j = soff[s]
                    hi = soff[s + 1]
                    while j + 1 < hi and scum[j] <= u:
                        j += 1
                    s2 = sdest[j]
                else:
                    na = navail[s]
                    if _unit(&state) < eps:
                        slot = <int>(sg_mix(&state) % <u64>na)
                    else:
                        slot = 0
                        best = q[s, 0]
                        if own == 0:
                            for j in range(1, na):
                                v = q[s, j]
                                if v > best:
                                    best = v
                                    slot = <int>j
                        else:
                            for j in range(1, na):
                                v = q[s, j]
                                if v < best:
                                    best = v
                                    slot = <int>j
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
                target = r + disc * _value_of(s2, owner, navail, sink, q)
                q[s, slot] = (1.0 - alpha) * q[s, slot] + alpha * target
                s = s2
            if curve_every > 0 and (e + 1) % curve_every == 0:
                total = 0.0
                for i in range(n_starts):
                    total += _value_of(starts[i], owner, navail, sink, q)
                curve_out[curve_k] = total / n_starts
                curve_k += 1
    return curve_k
