"""Compiled inner loops for CTMC simulation and uniformization.

Simulation randomness comes from a counter-based splitmix64 stream keyed by
a per-replicate seed, so a replicate's path depends only on its own seed and
never on batch layout.
"""

import math

import numpy as np
from numba import njit, uint64

GOLDEN = 0x9E3779B97F4A7C15

DEATH = 0
SI = 1
SIR = 2
SEIR = 3
LV = 4


@njit(cache=True, nogil=True)
def _mix(z):
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(cache=True, nogil=True)
def uniform(state):
    """Advance ``state[0]`` and return a double in (0, 1)."""
    state[0] += uint64(GOLDEN)
    return ((_mix(state[0]) >> uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@njit(cache=True, nogil=True)
def new_stream(seed):
    state = np.empty(1, dtype=np.uint64)
    state[0] = _mix(uint64(seed) + uint64(GOLDEN))
    return state


@njit(cache=True, nogil=True)
def poisson(state, lam):
    """Poisson variate: inversion below 30, PTRS rejection (Hormann 1993) above."""
    if lam <= 0.0:
        return 0.0
    if lam < 30.0:
        k = 0.0
        p = math.exp(-lam)
        cdf = p
        u = uniform(state)
        while u > cdf:
            k += 1.0
            p *= lam / k
            cdf += p
            if p < 1e-300 and k > lam:
                break
        return k
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = uniform(state) - 0.5
        v = uniform(state)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return k
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1.0)):
            return k


@njit(cache=True, nogil=True)
def propensities(code, x, th, N, a):
    if code == DEATH:
        # state (S, I)
        a[0] = th[0] * x[0]
    elif code == SI:
        a[0] = (th[0] + th[1] * x[1]) * x[0]
    elif code == SIR:
        # state (S, I, R); theta (beta, alpha)
        a[0] = th[0] * x[0] * x[1] / N
        a[1] = th[1] * x[1]
    elif code == SEIR:
        # state (S, E, I, R); theta (beta, alpha_E, alpha_I)
        a[0] = th[0] * x[0] * x[2] / N
        a[1] = th[1] * x[1]
        a[2] = th[2] * x[2]
    elif code == LV:
        # state (prey, predator); theta (K, a, b, c)
        a[0] = th[1] * x[0]
        a[1] = th[1] * x[0] * x[0] / th[0]
        a[2] = th[2] * x[0] * x[1]
        a[3] = th[3] * x[1]


@njit(cache=True, nogil=True)
def propensity_table(code, states, th, N, n_reactions):
    out = np.empty((states.shape[0], n_reactions))
    a = np.empty(n_reactions)
    for s in range(states.shape[0]):
        propensities(code, states[s].astype(np.float64), th, N, a)
        out[s] = a
    return out


@njit(cache=True, nogil=True)
def _ssa_path(code, stoich, x0, th, N, times, obs_idx, state, out):
    nr = stoich.shape[0]
    a = np.empty(nr)
    x = x0.astype(np.float64)
    t = 0.0
    k = 0
    L = times.shape[0]
    while k < L:
        propensities(code, x, th, N, a)
        a0 = 0.0
        for r in range(nr):
            a0 += a[r]
        if a0 <= 0.0:
            t = np.inf
        else:
            t += -math.log(uniform(state)) / a0
        while k < L and times[k] < t:
            for j in range(obs_idx.shape[0]):
                out[k, j] = x[obs_idx[j]]
            k += 1
        if k >= L:
            break
        target = uniform(state) * a0
        acc = 0.0
        chosen = nr - 1
        for r in range(nr):
            acc += a[r]
            if target < acc:
                chosen = r
                break
        # skip zero-propensity channels that float round-off could select
        while a[chosen] <= 0.0 and chosen > 0:
            chosen -= 1
        for s in range(x.shape[0]):
            x[s] += stoich[chosen, s]


@njit(cache=True, nogil=True)
def ssa_batch(code, stoich, x0, thetas, N, times, obs_idx, seeds):
    n = thetas.shape[0]
    out = np.empty((n, times.shape[0], obs_idx.shape[0]))
    for i in range(n):
        state = new_stream(seeds[i])
        _ssa_path(code, stoich, x0, thetas[i], N, times, obs_idx, state, out[i])
    return out


@njit(cache=True, nogil=True)
def _leap_path(code, stoich, x0, th, N, times, obs_idx, tau, state, out):
    nr = stoich.shape[0]
    ns = stoich.shape[1]
    a = np.empty(nr)
    x = x0.astype(np.float64)
    t = 0.0
    for k in range(times.shape[0]):
        while t < times[k]:
            h = min(tau, times[k] - t)
            propensities(code, x, th, N, a)
            for r in range(nr):
                if a[r] <= 0.0:
                    continue
                count = poisson(state, a[r] * h)
                # clamp so no reactant species goes negative
                for s in range(ns):
                    if stoich[r, s] < 0:
                        cap = np.floor(x[s] / -stoich[r, s])
                        if count > cap:
                            count = cap
                if count > 0:
                    for s in range(ns):
                        x[s] += count * stoich[r, s]
            t += h
            if times[k] - t < 1e-12:
                t = times[k]
        for j in range(obs_idx.shape[0]):
            out[k, j] = x[obs_idx[j]]


@njit(cache=True, nogil=True)
def leap_batch(code, stoich, x0, thetas, N, times, obs_idx, tau, seeds):
    n = thetas.shape[0]
    out = np.empty((n, times.shape[0], obs_idx.shape[0]))
    for i in range(n):
        state = new_stream(seeds[i])
        _leap_path(code, stoich, x0, thetas[i], N, times, obs_idx, tau, state, out[i])
    return out


@njit(cache=True, nogil=True)
def uniformized_propagate(v0, targets, rates, lam, weights):
    """Return sum_k weights[k] * v0 (I + Q/lam)^k for row vectors v0 (m, S)."""
    m, S = v0.shape
    R = targets.shape[1]
    exit_rate = np.zeros(S)
    for s in range(S):
        for r in range(R):
            if targets[s, r] >= 0:
                exit_rate[s] += rates[s, r]
    v = v0.copy()
    acc = weights[0] * v
    nxt = np.empty_like(v)
    for k in range(1, weights.shape[0]):
        for i in range(m):
            for s in range(S):
                nxt[i, s] = v[i, s] * (1.0 - exit_rate[s] / lam)
            for s in range(S):
                vs = v[i, s]
                if vs == 0.0:
                    continue
                for r in range(R):
                    tgt = targets[s, r]
                    if tgt >= 0:
                        nxt[i, tgt] += vs * rates[s, r] / lam
        v, nxt = nxt, v
        w = weights[k]
        for i in range(m):
            for s in range(S):
                acc[i, s] += w * v[i, s]
    return acc
