"""Resonant / non-resonant multi-index combinatorics.

Multi-indices are plain tuples of ints so they hash, sort and serialize
without ceremony.  Mode indices (``j``, ``k``) are 0-based throughout.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MultiIndex = tuple  # tuple[int, ...]

TAU_NONRES = 1e-9


class DimensionError(ValueError):
    pass


class ResonanceDegeneracyError(ArithmeticError):
    """Some index with entry sum 1 has m.omega == 0 within tolerance."""

    def __init__(self, m, value):
        self.m = tuple(m)
        self.value = value
        super().__init__(f"m={self.m} has m.omega={value:.3e}: neither resonant nor non-resonant")


def as_index(m) -> MultiIndex:
    return tuple(int(v) for v in m)


def basis(j: int, n: int) -> MultiIndex:
    return tuple(1 if i == j else 0 for i in range(n))


def absval(m) -> MultiIndex:
    return tuple(abs(v) for v in m)


def norm1(m) -> int:
    return sum(abs(v) for v in m)


def preceq(a, b) -> bool:
    return all(x <= y for x, y in zip(a, b))


def precedes(a, b) -> bool:
    """Strict entrywise order: a <= b componentwise and a != b."""
    return preceq(a, b) and tuple(a) != tuple(b)


@dataclass(frozen=True)
class FrequencyVector:
    """Simple negative eigenvalues omega_1 < ... < omega_N < 0."""

    omegas: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.omegas)
        object.__setattr__(self, "omegas", w)
        if len(w) < 2:
            raise ValueError("need at least two modes")
        if any(v >= 0 for v in w):
            raise ValueError(f"all frequencies must be negative, got {w}")
        if any(b <= a for a, b in zip(w, w[1:])):
            raise ValueError(f"frequencies must be strictly increasing, got {w}")

    def __len__(self):
        return len(self.omegas)

    def __iter__(self):
        return iter(self.omegas)

    def __getitem__(self, j):
        return self.omegas[j]

    def asarray(self) -> np.ndarray:
        return np.array(self.omegas)

    def dot(self, m) -> float:
        if len(m) != len(self.omegas):
            raise DimensionError(f"index of length {len(m)} vs {len(self.omegas)} modes")
        return float(sum(mj * wj for mj, wj in zip(m, self.omegas)))


def _omega(omega) -> FrequencyVector:
    return omega if isinstance(omega, FrequencyVector) else FrequencyVector(tuple(omega))


class IndexClass(enum.Enum):
    NON_RESONANT = "NonResonant"
    RESONANT = "Resonant"
    OFF_SHELL = "OffShell"


class IndexClassification(NamedTuple):
    kind: IndexClass
    value: float


def classify(m, omega) -> IndexClassification:
    omega = _omega(omega)
    value = omega.dot(m)
    if sum(m) != 1:
        return IndexClassification(IndexClass.OFF_SHELL, value)
    if value > 0:
        return IndexClassification(IndexClass.RESONANT, value)
    return IndexClassification(IndexClass.NON_RESONANT, value)


def pair_bound(j: int, k: int, omega) -> tuple[int, MultiIndex]:
    """Smallest n with n*(omega_k - omega_j) + omega_k > 0, and the index m^(jk).

    m^(jk) carries -n at j, n+1 at k and zeros elsewhere; it is always resonant.
    """
    omega = _omega(omega)
    if not 0 <= j < k < len(omega):
        raise ValueError(f"need 0 <= j < k < N, got j={j}, k={k}")
    gap = omega[k] - omega[j]
    n = max(0, int(np.floor(-omega[k] / gap)) - 1)
    # the float test is the definition, the floor only seeds it
    while n * gap + omega[k] <= 0:
        n += 1
    m = [0] * len(omega)
    m[j] = -n
    m[k] = n + 1
    return n, tuple(m)


@dataclass(frozen=True)
class IndexTables:
    omega: FrequencyVector
    r_min: tuple
    nr1: tuple
    nr0: tuple
    pair_bounds: dict = field(default_factory=dict)  # (j, k) -> n_jk
    box: int = 0  # B = max(n_jk + 1); one component may reach N*B

    @property
    def n_modes(self) -> int:
        return len(self.omega)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_dict(self) -> dict:
        return {
            "omega": list(self.omega.omegas),
            "r_min": [list(m) for m in self.r_min],
            "nr1": [list(m) for m in self.nr1],
            "bounds": [[j, k, n] for (j, k), n in sorted(self.pair_bounds.items())],
            "box": [self.box, self.n_modes * self.box],
        }


def _sum_one_box(n_modes: int, bound: int):
    """All m with sum(m) == 1, |m_j| <= bound except one entry <= n_modes*bound."""
    seen = set()
    rng = range(-bound, bound + 1)
    for special in range(n_modes):
        for rest in itertools.product(rng, repeat=n_modes - 1):
            ms = 1 - sum(rest)
            if abs(ms) > n_modes * bound:
                continue
            m = rest[:special] + (ms,) + rest[special:]
            if m not in seen:
                seen.add(m)
                yield m


def nonresonance_witness(omega, max_norm: int, tau: float = TAU_NONRES, sum_one_only: bool = False):
    """Return the first m != 0 with ||m|| <= max_norm and |m.omega| <= tau*max|omega|, else None.

    With ``sum_one_only`` the search is restricted to indices with entry sum 1,
    which is the part of the condition the index tables depend on.
    """
    omega = _omega(omega)
    n = len(omega)
    w = omega.asarray()
    thresh = tau * np.max(np.abs(w))
    for total in range(1, max_norm + 1):
        for m in _fixed_norm(n, total):
            if sum_one_only and sum(m) != 1:
                continue
            if abs(float(np.dot(m, w))) <= thresh:
                return m
    return None


def _fixed_norm(n: int, total: int):
    # compositions of `total` into n nonnegative parts, then all sign patterns
    for cut in itertools.combinations(range(total + n - 1), n - 1):
        parts = np.diff((-1,) + cut + (total + n - 1,)) - 1
        nz = [i for i in range(n) if parts[i]]
        for signs in itertools.product((1, -1), repeat=len(nz)):
            m = [int(p) for p in parts]
            for i, s in zip(nz, signs):
                m[i] *= s
            yield tuple(m)


def enumerate_tables(omega, tau: float = TAU_NONRES) -> IndexTables:
    """Minimal resonant indices and the non-resonant indices not above them.

    Every member of either set lies in the box |m_j| <= B for all but one j,
    with the remaining entry bounded by N*B, B = max_{k<l}(n_kl + 1).
    """
    omega = _omega(omega)
    n = len(omega)
    pb = {}
    for j, k in itertools.combinations(range(n), 2):
        pb[(j, k)] = pair_bound(j, k, omega)[0]
    bound = max(v + 1 for v in pb.values())
    thresh = tau * max(abs(v) for v in omega)

    res, nonres = [], []
    for m in _sum_one_box(n, bound):
        value = omega.dot(m)
        if abs(value) <= thresh:
            raise ResonanceDegeneracyError(m, value)
        (res if value > 0 else nonres).append(m)

    res_abs = [absval(m) for m in res]
    r_min = [m for m, a in zip(res, res_abs) if not any(precedes(b, a) for b in res_abs)]
    rmin_abs = [absval(m) for m in r_min]
    nr1 = [m for m in nonres if not any(precedes(b, absval(m)) for b in rmin_abs)]
    nr0 = tuple(basis(j, n) for j in range(n))
    return IndexTables(
        omega=omega,
        r_min=tuple(sorted(r_min)),
        nr1=tuple(sorted(nr1)),
        nr0=tuple(sorted(nr0)),
        pair_bounds=pb,
        box=bound,
    )


def monomial_eval(z, m) -> complex:
    """z^m with negative exponents acting on the conjugate."""
    z = np.asarray(z, dtype=complex)
    if len(z) != len(m):
        raise DimensionError(f"z has {len(z)} entries, m has {len(m)}")
    out = 1.0 + 0.0j
    for zj, mj in zip(z, m):
        out *= zj ** mj if mj >= 0 else np.conj(zj) ** (-mj)
    return out


def monomial_product_exponent(m1, m2) -> tuple[MultiIndex, MultiIndex]:
    """(deficit, sum) with z^m1 z^m2 = |z|^deficit z^(m1+m2)."""
    if len(m1) != len(m2):
        raise DimensionError("length mismatch")
    s = tuple(a + b for a, b in zip(m1, m2))
    d = tuple(abs(a) + abs(b) - abs(c) for a, b, c in zip(m1, m2, s))
    return d, s


def enumerate_A(order: int, target, pool: Iterable) -> list:
    """Ordered (2*order+1)-tuples over ``pool`` with alternating sum ``target``
    and entrywise absolute values summing exactly to |target|.

    Odd positions (1st, 3rd, ...) enter with +, even positions with -.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    target = as_index(target)
    cap = absval(target)
    length = 2 * order + 1
    if length > norm1(target):
        return []
    cands = [as_index(p) for p in pool if preceq(absval(p), cap)]
    out = []

    def rec(pos, acc, budget, chosen):
        left = length - pos
        if left == 0:
            if acc == target and not any(budget):
                out.append(tuple(chosen))
            return
        if sum(budget) < left:
            return
        sign = 1 if pos % 2 == 0 else -1
        for c in cands:
            a = absval(c)
            if not preceq(a, budget):
                continue
            rec(pos + 1,
                tuple(x + sign * y for x, y in zip(acc, c)),
                tuple(x - y for x, y in zip(budget, a)),
                chosen + [c])

    rec(0, (0,) * len(target), cap, [])
    return sorted(out)


def sorted_indices(ms: Sequence) -> list:
    return sorted(as_index(m) for m in ms)
