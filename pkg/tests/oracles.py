"""Slow, obviously-correct reference implementations used only by the tests."""
import itertools

import numpy as np


def brute_force_tables(omega, max_norm=20):
    """R_min and NR_1 straight from the definitions, over all sum-one indices with ||m|| <= max_norm."""
    omega = np.asarray(omega, float)
    n = len(omega)
    cands = []
    for head in itertools.product(range(-max_norm, max_norm + 1), repeat=n - 1):
        m = head + (1 - sum(head),)
        if sum(abs(v) for v in m) <= max_norm:
            cands.append(m)
    res = np.array([m for m in cands if np.dot(m, omega) > 0], int).reshape(-1, n)
    nonres = np.array([m for m in cands if np.dot(m, omega) < 0], int).reshape(-1, n)

    def strictly_below(A, B):
        # out[i, k] is True when |A_i| <= |B_k| entrywise and |A_i| != |B_k|
        a, b = np.abs(A)[:, None, :], np.abs(B)[None, :, :]
        return np.all(a <= b, axis=2) & np.any(a != b, axis=2)

    r_min = res[~strictly_below(res, res).any(axis=0)]
    nr1 = nonres[~strictly_below(r_min, nonres).any(axis=0)] if len(r_min) else nonres
    return sorted(map(tuple, r_min.tolist())), sorted(map(tuple, nr1.tolist()))


def A_brute(order, target, pool):
    """A(order, target) by exhaustive product over the pool (tiny cases only)."""
    target = tuple(target)
    out = []
    for tup in itertools.product(pool, repeat=2 * order + 1):
        s = np.zeros(len(target), int)
        a = np.zeros(len(target), int)
        for i, m in enumerate(tup):
            s += (1 if i % 2 == 0 else -1) * np.asarray(m)
            a += np.abs(m)
        if tuple(s) == target and tuple(a) == tuple(abs(v) for v in target):
            out.append(tuple(tup))
    return sorted(out)


def poschl_teller_levels(depth_l=2):
    """Bound states of -l(l+1) sech^2 x: -(l - k)^2, k = 0..l-1."""
    return [-(depth_l - k) ** 2 for k in range(depth_l)]
