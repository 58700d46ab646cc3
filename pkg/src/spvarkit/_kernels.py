"""Numba kernels shared by the samplers.

All kernels take the symmetric CSR adjacency built by
``IsingProblem._arrays`` and work on int8 spin rows.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _local_fields(s, h, indptr, indices, data):
    n = h.shape[0]
    f = h.copy()
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            f[i] += data[k] * s[indices[k]]
    return f


@njit(cache=True, inline="always")
def _xorshift(x):
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    return x


@njit(cache=True, inline="always")
def _uniform(x):
    # xorshift64* output mapped to [0, 1)
    return ((x * np.uint64(0x2545F4914F6CDD1D)) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _rng_state(seed):
    # splitmix64 so that nearby seeds give unrelated streams
    z = np.uint64(seed) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return z if z != 0 else np.uint64(1)


@njit(cache=True)
def anneal(h, indptr, indices, data, betas, seeds):
    """Metropolis single-spin-flip annealing, one independent read per seed."""
    n = h.shape[0]
    reads = seeds.shape[0]
    out = np.empty((reads, n), dtype=np.int8)
    s = np.empty(n)
    f = np.empty(n)
    for r in range(reads):
        x = _rng_state(seeds[r])
        for i in range(n):
            x = _xorshift(x)
            s[i] = 1.0 if _uniform(x) < 0.5 else -1.0
        for i in range(n):
            acc = h[i]
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * s[indices[k]]
            f[i] = acc
        for beta in betas:
            for i in range(n):
                bde = -2.0 * beta * s[i] * f[i]
                flip = bde <= 0.0
                # exp(-40) is below the resolution of the uniform draw
                if not flip and bde < 40.0:
                    x = _xorshift(x)
                    flip = _uniform(x) < np.exp(-bde)
                if flip:
                    s[i] = -s[i]
                    delta = 2.0 * s[i]
                    for k in range(indptr[i], indptr[i + 1]):
                        f[indices[k]] += data[k] * delta
        for i in range(n):
            out[r, i] = 1 if s[i] > 0 else -1
    return out


@njit(cache=True)
def tabu_search(h, indptr, indices, data, tenure, budget, seeds):
    """Multi-start tabu 1-opt; returns the best state seen in each restart.

    Every iteration takes the best admissible flip (improving or not).  A tabu
    flip is admissible only when it beats the incumbent.  A restart ends after
    ``budget`` consecutive moves without improving its incumbent.
    """
    n = h.shape[0]
    reads = seeds.shape[0]
    out = np.empty((reads, n), dtype=np.int8)
    for r in range(reads):
        x = _rng_state(seeds[r])
        s = np.empty(n, dtype=np.int8)
        for i in range(n):
            x = _xorshift(x)
            s[i] = 1 if _uniform(x) < 0.5 else -1
        f = _local_fields(s, h, indptr, indices, data)
        e = 0.0
        for i in range(n):
            e += s[i] * (h[i] + f[i]) * 0.5
        best = s.copy()
        best_e = e
        tabu_until = np.zeros(n, dtype=np.int64)
        stale = 0
        it = 0
        while stale < budget and n > 0:
            it += 1
            pick = -1
            pick_de = np.inf
            for i in range(n):
                de = -2.0 * s[i] * f[i]
                if tabu_until[i] >= it and not (e + de < best_e - 1e-12):
                    continue
                if de < pick_de:
                    pick_de = de
                    pick = i
            if pick < 0:
                break
            s[pick] = -s[pick]
            delta = 2.0 * s[pick]
            for k in range(indptr[pick], indptr[pick + 1]):
                f[indices[k]] += data[k] * delta
            e += pick_de
            tabu_until[pick] = it + tenure
            if e < best_e - 1e-12:
                best_e = e
                best[:] = s
                stale = 0
            else:
                stale += 1
        out[r] = best
    return out


@njit(cache=True)
def steepest_descent(samples, h, indptr, indices, data):
    """Greedy single-flip descent on every row until no flip lowers the energy."""
    out = samples.copy()
    n = h.shape[0]
    for r in range(out.shape[0]):
        s = out[r]
        f = _local_fields(s, h, indptr, indices, data)
        while True:
            pick = -1
            pick_de = -1e-12
            for i in range(n):
                de = -2.0 * s[i] * f[i]
                if de < pick_de:
                    pick_de = de
                    pick = i
            if pick < 0:
                break
            s[pick] = -s[pick]
            delta = 2.0 * s[pick]
            for k in range(indptr[pick], indptr[pick + 1]):
                f[indices[k]] += data[k] * delta
    return out


@njit(cache=True)
def _gray_scan(h, indptr, indices, data, threshold, collect, limit):
    # Walk all 2^n states in Gray-code order starting from all spins -1.
    n = h.shape[0]
    s = -np.ones(n, dtype=np.int8)
    f = _local_fields(s, h, indptr, indices, data)
    e = 0.0
    for i in range(n):
        e += s[i] * (h[i] + f[i]) * 0.5
    best = e
    found = np.empty((limit if collect else 0, n), dtype=np.int8)
    count = 0
    if collect and e <= threshold:
        if count < limit:
            found[count] = s
        count += 1
    total = 1 << n
    for step in range(1, total):
        i = 0
        while not (step >> i) & 1:
            i += 1
        de = -2.0 * s[i] * f[i]
        s[i] = -s[i]
        delta = 2.0 * s[i]
        for k in range(indptr[i], indptr[i + 1]):
            f[indices[k]] += data[k] * delta
        e += de
        if e < best:
            best = e
        if collect and e <= threshold:
            if count < limit:
                found[count] = s
            count += 1
    return best, found, count


def min_energy_scan(h, indptr, indices, data):
    best, _, _ = _gray_scan(h, indptr, indices, data, 0.0, False, 0)
    return best


def collect_below(h, indptr, indices, data, threshold, limit):
    _, found, count = _gray_scan(h, indptr, indices, data, threshold, True, limit)
    return found[: min(count, limit)], count
