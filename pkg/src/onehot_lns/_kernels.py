"""Compiled inner loops (numba).

All randomness inside the kernels comes from per-read xorshift64* streams
seeded by the caller, so results never depend on scheduling.
"""
import numpy as np
from numba import njit

_TIE = 1e-12
_MULT = np.uint64(0x2545F4914F6CDD1D)


@njit(cache=True)
def _xorshift(x):
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    return x


@njit(cache=True)
def _uniform(x):
    return (x * _MULT >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def potts_greedy_sweep(state, order, indptr, nbr, cpl, eff_shift, q):
    """One sweep of single-site descent; ``state`` holds 0-based components."""
    changed = False
    e = np.empty(q)
    for t in range(order.size):
        i = order[t]
        for c in range(q):
            e[c] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            # the edge is satisfied for component c with c == s_nbr + shift (mod q)
            c = ((state[nbr[p]] + eff_shift[p]) % q + q) % q
            e[c] += cpl[p]
        cur = state[i]
        best = cur
        lo = e[cur]
        for c in range(q):
            if e[c] < lo - _TIE:
                lo = e[c]
                best = c
        if best != cur:
            # lowest index among the minimizers
            for c in range(q):
                if e[c] <= lo + _TIE:
                    best = c
                    break
            state[i] = best
            changed = True
    return changed


@njit(cache=True)
def group_greedy_sweep(bits, order, groups, group_of, linear, indptr, indices, data):
    """One sweep of exact per-group minimization over all 2^q bit patterns.

    ``groups`` is an (N, q) table of bit indices; ``group_of`` maps bit to
    group.  The current pattern is kept on ties.
    """
    q = groups.shape[1]
    npat = 1 << q
    h = np.empty(q)
    w = np.zeros((q, q))
    changed = False
    for t in range(order.size):
        g = order[t]
        for k in range(q):
            b = groups[g, k]
            h[k] = linear[b]
            for l in range(q):
                w[k, l] = 0.0
        for k in range(q):
            b = groups[g, k]
            for p in range(indptr[b], indptr[b + 1]):
                c = indices[p]
                if group_of[c] == g:
                    for l in range(q):
                        if groups[g, l] == c:
                            w[k, l] = data[p]
                elif bits[c]:
                    h[k] += data[p]
        cur = 0
        for k in range(q):
            if bits[groups[g, k]]:
                cur |= 1 << k
        best = -1
        best_e = 0.0
        cur_e = 0.0
        for pat in range(npat):
            e = 0.0
            for k in range(q):
                if (pat >> k) & 1:
                    e += h[k]
                    for l in range(k + 1, q):
                        if (pat >> l) & 1:
                            e += w[k, l]
            if pat == cur:
                cur_e = e
            if best < 0 or e < best_e - _TIE:
                best = pat
                best_e = e
        if cur_e > best_e + _TIE:
            for k in range(q):
                bits[groups[g, k]] = (best >> k) & 1
            changed = True
    return changed


@njit(cache=True)
def sa_run(n, linear, indptr, indices, data, betas, seeds):
    """Single-flip Metropolis annealing, one independent restart per seed."""
    reads = seeds.size
    out = np.zeros((reads, n), dtype=np.uint8)
    field = np.empty(n)
    for r in range(reads):
        x = seeds[r]
        if x == np.uint64(0):
            x = np.uint64(0x9E3779B97F4A7C15)
        state = out[r]
        for k in range(n):
            x = _xorshift(x)
            state[k] = 1 if _uniform(x) < 0.5 else 0
        for k in range(n):
            f = linear[k]
            for p in range(indptr[k], indptr[k + 1]):
                if state[indices[p]]:
                    f += data[p]
            field[k] = f
        for s in range(betas.size):
            beta = betas[s]
            for k in range(n):
                delta = field[k] if state[k] == 0 else -field[k]
                accept = delta <= 0.0
                if not accept and beta * delta < 40.0:
                    x = _xorshift(x)
                    accept = _uniform(x) < np.exp(-beta * delta)
                if accept:
                    step = 1.0 if state[k] == 0 else -1.0
                    state[k] = 1 - state[k]
                    for p in range(indptr[k], indptr[k + 1]):
                        field[indices[p]] += step * data[p]
    return out
