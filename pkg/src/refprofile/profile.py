"""Refined profile phi(z) = z.phi + sum_{m in NR1} z^m psi_m(|z|^2).

Expansions of products of z-monomials are stored as dicts ``{m: field}``
meaning ``sum_m z^m f_m`` with real fields ``f_m`` at a fixed modulus
vector r = |z|.  Multiplying two such terms uses z^a z^b = |z|^d z^(a+b),
so every |z|-power is a nonnegative integer power of r and nothing is
ever divided by r.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import newton_krylov, NoConvergence

from .indices import (IndexTables, basis, enumerate_A, monomial_eval,
                      monomial_product_exponent, norm1)
from .spectral import GridOperator, WeightedNorm, default_gamma0, weighted_norm, write_field_csv

log = logging.getLogger(__name__)

TAU_FP = 1e-11
MAX_ITER = 200


class ProfileError(RuntimeError):
    pass


class ProfileRadiusError(ProfileError):
    """Fixed point did not converge: |z|^2 is outside the profile's radius."""


class StaleCoefficientsError(ProfileError):
    pass


@dataclass(frozen=True)
class NonlinearitySpec:
    """g(s) = sum_k taylor[k-1] s^k, i.e. taylor[k-1] = g^(k)(0)/k!."""

    taylor: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "taylor", tuple(float(c) for c in self.taylor))

    @property
    def degree(self) -> int:
        return len(self.taylor)

    @property
    def is_linear(self) -> bool:
        return not any(self.taylor)

    def coefficient(self, k: int) -> float:
        """g^(k)(0)/k!"""
        if k < 1 or k > self.degree:
            return 0.0
        return self.taylor[k - 1]

    def derivative_at_zero(self, k: int) -> float:
        return math.factorial(k) * self.coefficient(k)

    def derivative(self, order: int, s):
        """g^(order)(s), pointwise."""
        s = np.asarray(s, float)
        out = np.zeros_like(s)
        for k in range(max(order, 1), self.degree + 1):
            c = self.taylor[k - 1] * math.factorial(k) / math.factorial(k - order)
            out = out + c * s ** (k - order)
        return out

    def __call__(self, s):
        return self.derivative(0, s)

    def antiderivative(self, s):
        """G(s) = int_0^s g, with G(0) = 0."""
        s = np.asarray(s, float)
        return sum(c * s ** (k + 1) / (k + 1) for k, c in enumerate(self.taylor, start=1))


def truncation_order(omegas) -> int:
    """Smallest M with omega_1 + M * min_j(omega_{j+1} - omega_j) > 0."""
    w = np.sort(np.asarray(omegas, float))
    gap = np.min(np.diff(w))
    M = max(1, int(np.floor(-w[0] / gap)))
    while w[0] + M * gap <= 0:
        M += 1
    return M


# -- monomial-series algebra ---------------------------------------------------

def _mul(a: dict, b: dict, r) -> dict:
    out = {}
    rpow = {}
    for m1, f1 in a.items():
        for m2, f2 in b.items():
            d, s = monomial_product_exponent(m1, m2)
            c = rpow.get(d)
            if c is None:
                c = rpow[d] = float(np.prod([rj ** dj for rj, dj in zip(r, d)]))
            if c == 0.0:
                continue
            t = c * (f1 * f2)
            if s in out:
                out[s] = out[s] + t
            else:
                out[s] = t
    return out


def _conj(a: dict) -> dict:
    return {tuple(-v for v in m): f for m, f in a.items()}


def nonlinear_components(nl: NonlinearitySpec, phi_tilde: dict, r, order: int) -> dict:
    """Phase components g_m of g(|phi|^2) phi, Taylor-expanded around the diagonal part.

    |phi|^2 = S + Off with S = sum_n |z|^(2|n|) phi_n^2 (phase 0) and
    g(S + Off) ~ sum_{k<=order} g^(k)(S)/k! Off^k.  For a polynomial g of
    degree <= order the expansion is exact.
    """
    n = len(r)
    zero = (0,) * n
    sq = _mul(phi_tilde, _conj(phi_tilde), r)
    npts = len(next(iter(phi_tilde.values())))
    S = sq.pop(zero, np.zeros(npts))
    off = sq
    acc = {}
    term = phi_tilde
    for k in range(0, min(order, nl.degree) + 1):
        if k > 0:
            term = _mul(off, term, r)
        w = nl.derivative(k, S) / math.factorial(k)
        if not np.any(w):
            continue
        for m, f in term.items():
            acc[m] = acc[m] + w * f if m in acc else w * f
    return acc


# -- leading coefficients --------------------------------------------------------

@dataclass
class LeadingCoefficients:
    tables: IndexTables
    modes: np.ndarray
    omegas: np.ndarray
    phi_tilde0: dict
    g0: dict
    G: dict
    orders: dict = field(default_factory=dict)  # m -> {k: tuples in A(k, m)}

    @property
    def nr1(self):
        return self.tables.nr1

    @property
    def r_min(self):
        return self.tables.r_min


def _A_sum(nl, target, pool, phi0, orders_out, owner_norm=None):
    total = None
    per = {}
    for k in range(1, (norm1(target) - 1) // 2 + 1):
        tuples = enumerate_A(k, target, pool)
        per[k] = tuples
        c = nl.coefficient(k)
        if c == 0.0 or not tuples:
            continue
        for tup in tuples:
            if owner_norm is not None and any(norm1(t) >= owner_norm for t in tup):
                raise ProfileError(f"recursion for {target} is not well founded: {tup}")
            prod = c * np.prod([phi0[t] for t in tup], axis=0)
            total = prod if total is None else total + prod
    orders_out[tuple(target)] = per
    return total


def build_leading(op: GridOperator, nl: NonlinearitySpec, tables: IndexTables) -> LeadingCoefficients:
    """phi~_m(0), g_m(0) for m in NR1 and G_m for m in R_min, by increasing ||m||."""
    n = op.n_modes
    if len(tables.omega) != n:
        raise ValueError("index tables and operator disagree on the mode count")
    L = max((norm1(m) - 1) // 2 for m in tables.r_min)
    if nl.degree < L:
        raise ValueError(f"nonlinearity degree {nl.degree} < L = {L} required by R_min")
    npts = op.grid.n_points
    omegas = op.omegas
    phi0, g0, orders = {}, {}, {}
    for j in range(n):
        e = basis(j, n)
        phi0[e] = op.mode(j).copy()
        g0[e] = np.zeros(npts)
    for m in sorted(set(tables.nr1) - set(tables.nr0), key=lambda m: (norm1(m), m)):
        gm = _A_sum(nl, m, tables.nr1, phi0, orders, owner_norm=norm1(m))
        g0[m] = np.zeros(npts) if gm is None else gm
        lam = float(np.dot(m, omegas))
        phi0[m] = -op.resolvent_solve(lam, g0[m]) if gm is not None else np.zeros(npts)
    G = {}
    for m in tables.r_min:
        Gm = _A_sum(nl, m, tables.nr1, phi0, orders, owner_norm=norm1(m))
        G[m] = np.zeros(npts) if Gm is None else Gm
    return LeadingCoefficients(tables, op.modes.copy(), omegas.copy(), phi0, g0, G, orders)


# -- fixed point -----------------------------------------------------------------

@dataclass
class ProfileCoefficients:
    z2: np.ndarray
    psi: dict
    shift: np.ndarray  # varpi - omega
    omegas: np.ndarray
    truncation: int
    residual: float
    iterations: int
    ratios: list = field(default_factory=list)
    method: str = "picard"

    @property
    def varpi(self) -> np.ndarray:
        return self.omegas + self.shift

    def phi_tilde(self, modes) -> dict:
        out = dict(self.psi)
        for j in range(modes.shape[1]):
            e = basis(j, modes.shape[1])
            out[e] = modes[:, j] + self.psi[e]
        return out

    @property
    def contraction(self) -> float:
        """Observed linear contraction ratio of the Picard map (first step)."""
        return self.ratios[0] if self.ratios else 0.0


def _picard_map(op, nl, tables, modes, psi, r, order):
    n = op.n_modes
    phit = dict(psi)
    for j in range(n):
        e = basis(j, n)
        phit[e] = modes[:, j] + psi[e]
    gm = nonlinear_components(nl, phit, r, order)
    zeros = np.zeros(op.grid.n_points)
    shift = np.array([op.h * np.dot(gm.get(basis(j, n), zeros), modes[:, j]) for j in range(n)])
    new = {}
    for m in tables.nr1:
        rhs = float(np.dot(shift, m)) * psi[m] - gm.get(m, zeros)
        if norm1(m) == 1:
            j = m.index(1)
            new[m] = op.resolvent_solve(op.omegas[j], rhs, restrict=j)
        else:
            new[m] = op.resolvent_solve(float(np.dot(m, op.omegas)), rhs)
    return new, shift


def solve_profile(op: GridOperator, nl: NonlinearitySpec, tables: IndexTables, lead: LeadingCoefficients,
                  z2, *, tol=TAU_FP, max_iter=MAX_ITER, damping=1.0, guess: ProfileCoefficients | None = None,
                  truncation: int | None = None) -> ProfileCoefficients:
    """Solve psi_m = A_m((varpi - omega).m psi_m - g_m) for m in NR1 at fixed |z|^2.

    Damped Picard iteration, polished to round-off once below ``tol``;
    falls back to a finite-difference Newton-Krylov solve if Picard stalls.
    """
    z2 = np.asarray(z2, float)
    if z2.shape != (op.n_modes,) or np.any(z2 < 0):
        raise ValueError("z2 must be a nonnegative vector with one entry per mode")
    r = np.sqrt(z2)
    order = truncation_order(op.omegas) if truncation is None else truncation
    modes = lead.modes
    npts = op.grid.n_points
    keys = list(tables.nr1)
    if guess is not None:
        psi = {m: guess.psi[m].copy() for m in keys}
    else:
        psi = {m: np.zeros(npts) for m in keys}

    if not np.any(z2) or nl.is_linear:
        return ProfileCoefficients(z2, psi if np.any(z2) else {m: np.zeros(npts) for m in keys},
                                   np.zeros(op.n_modes), op.omegas.copy(), order, 0.0, 0)

    ratios, hist = [], []
    shift = np.zeros(op.n_modes)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            new, shift = _picard_map(op, nl, tables, modes, psi, r, order)
            res = max(op.l2(psi[m] - new[m]) for m in keys)
            scale = max(op.l2(new[m]) for m in keys)
        if not np.isfinite(res) or res > 1e8:
            hist.append(res)
            break
        if hist:
            ratios.append(res / hist[-1] if hist[-1] > 0 else 0.0)
        hist.append(res)
        psi = {m: psi[m] + damping * (new[m] - psi[m]) for m in keys}
        if res <= tol:
            # keep going while round-off still improves
            if res <= 1e-15 * max(scale, 1e-300) or (len(hist) > 1 and res > 0.25 * hist[-2]) or res == 0:
                converged = True
                break
        elif len(hist) > 3 and all(hist[-i] > hist[-i - 1] for i in range(1, 4)):
            break
    if converged:
        new, shift = _picard_map(op, nl, tables, modes, psi, r, order)
        return ProfileCoefficients(z2, psi, shift, op.omegas.copy(), order, hist[-1], it, ratios)

    log.info("Picard stalled at |z|^2=%s (res %.2e); trying Newton-Krylov", z2, hist[-1])

    def pack(d):
        return np.concatenate([d[m] for m in keys])

    def unpack(v):
        return {m: v[i * npts:(i + 1) * npts] for i, m in enumerate(keys)}

    def F(v):
        p = unpack(v)
        new, _ = _picard_map(op, nl, tables, modes, p, r, order)
        return pack({m: p[m] - new[m] for m in keys})

    if not np.isfinite(hist[-1]) or hist[-1] > 1e8:
        raise ProfileRadiusError(f"Picard iteration diverged at |z|^2={z2.tolist()}")
    try:
        # f_tol is a max-norm; the acceptance test below is per-m L2
        sol = newton_krylov(F, pack(psi), f_tol=0.5 * tol / math.sqrt(npts * op.h), maxiter=50)
    except (NoConvergence, ValueError, FloatingPointError) as exc:
        raise ProfileRadiusError(f"no fixed point at |z|^2={z2.tolist()}: {exc}") from exc
    psi = unpack(sol)
    new, shift = _picard_map(op, nl, tables, modes, psi, r, order)
    res = max(op.l2(psi[m] - new[m]) for m in keys)
    if not np.isfinite(res) or res > tol:
        raise ProfileRadiusError(f"no fixed point at |z|^2={z2.tolist()} (residual {res:.2e})")
    return ProfileCoefficients(z2, psi, shift, op.omegas.copy(), order, res, it, ratios, method="newton")


def fixed_point_residual(op, nl, tables, lead, coeffs: ProfileCoefficients) -> float:
    """sup_m ||F_m|| evaluated at the solved coefficients."""
    new, _ = _picard_map(op, nl, tables, lead.modes, coeffs.psi, np.sqrt(coeffs.z2), coeffs.truncation)
    return max(op.l2(coeffs.psi[m] - new[m]) for m in tables.nr1)


def probe_radius(op, nl, tables, lead, ladder=(0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5), max_ratio=0.9):
    """Largest rho in ``ladder`` (direction (1,..,1)) where Picard contracts with ratio <= max_ratio."""
    best = 0.0
    report = []
    for rho in sorted(ladder):
        try:
            c = solve_profile(op, nl, tables, lead, np.full(op.n_modes, rho**2), max_iter=60)
            ratio = c.contraction
            ok = ratio <= max_ratio and c.method == "picard"
        except ProfileRadiusError:
            ratio, ok = float("inf"), False
        report.append((rho, ratio, ok))
        if not ok:
            break
        best = rho
    return best, report


# -- evaluation ------------------------------------------------------------------

def _check_base(coeffs, z, stale_tol):
    z2 = np.abs(np.asarray(z, complex)) ** 2
    d = float(np.max(np.abs(z2 - coeffs.z2)))
    if d > stale_tol:
        raise StaleCoefficientsError(f"|z|^2 differs from the coefficients' base point by {d:.2e}")


def eval_profile(lead: LeadingCoefficients, coeffs: ProfileCoefficients, z, *, stale_tol=1e-10):
    """phi(z) as a complex field."""
    z = np.asarray(z, complex)
    _check_base(coeffs, z, stale_tol)
    out = lead.modes @ z
    for m, f in coeffs.psi.items():
        zm = monomial_eval(z, m)
        if zm != 0:
            out = out + zm * f
    return out


@dataclass
class ForcedResidual:
    raw: np.ndarray
    after_G: np.ndarray
    norms: dict


def forced_residual(op: GridOperator, nl: NonlinearitySpec, lead: LeadingCoefficients,
                    coeffs: ProfileCoefficients, z, *, gamma0=None, stale_tol=1e-10,
                    include_eigen_residual=False) -> ForcedResidual:
    """i d/dt phi(z(t)) - H phi - g(|phi|^2) phi at t = 0, with z_j(t) = exp(-i varpi_j t) z_j.

    ``after_G`` adds back sum_{R_min} z^m G_m, leaving minus the remainder.
    H phi_j is taken as omega_j phi_j (the eigenpairs are treated as exact)
    unless ``include_eigen_residual``.
    """
    z = np.asarray(z, complex)
    _check_base(coeffs, z, stale_tol)
    n = op.n_modes
    phit = coeffs.phi_tilde(lead.modes)
    lin = np.zeros(op.grid.n_points, complex)
    for m in lead.nr1:
        zm = monomial_eval(z, m)
        if zm == 0:
            continue
        psi = coeffs.psi[m]
        term = float(np.dot(coeffs.shift, m)) * phit[m] + float(np.dot(m, op.omegas)) * psi - op.apply(psi)
        lin = lin + zm * term
    if include_eigen_residual:
        for j in range(n):
            lin = lin + z[j] * (op.omegas[j] * lead.modes[:, j] - op.apply(lead.modes[:, j]))
    phi = eval_profile(lead, coeffs, z, stale_tol=stale_tol)
    raw = lin - nl(np.abs(phi) ** 2) * phi
    after = raw.copy()
    for m in lead.r_min:
        zm = monomial_eval(z, m)
        if zm != 0:
            after = after + zm * lead.G[m]
    g0 = default_gamma0(op.omegas) if gamma0 is None else gamma0
    norms = {}
    for name, f in (("raw", raw), ("after_G", after)):
        for s in (0, 1):
            norms[f"{name}_s{s}"] = weighted_norm(op, f, WeightedNorm(g0, s))
    return ForcedResidual(raw, after, norms)


def taylor_tail(op, nl, lead, coeffs, z, order=None):
    """Part of g(|phi|^2) phi dropped by truncating the expansion at ``order``."""
    z = np.asarray(z, complex)
    order = coeffs.truncation if order is None else order
    phi = eval_profile(lead, coeffs, z, stale_tol=np.inf)
    full = nl(np.abs(phi) ** 2) * phi
    comps = nonlinear_components(nl, coeffs.phi_tilde(lead.modes), np.abs(z), order)
    kept = np.zeros(op.grid.n_points, complex)
    for m, f in comps.items():
        kept = kept + monomial_eval(z, m) * f
    return full - kept


def stationary_residual(op, nl, lead, coeffs, j: int, zj: complex) -> float:
    """||H phi + g(|phi|^2) phi - varpi_j phi|| for the single-mode profile phi(z e_j)."""
    z = np.zeros(op.n_modes, complex)
    z[j] = zj
    phi = eval_profile(lead, coeffs, z)
    return op.l2(op.apply(phi) + nl(np.abs(phi) ** 2) * phi - coeffs.varpi[j] * phi)


# -- dumps -------------------------------------------------------------------------

def write_coefficients(out_dir, op: GridOperator, lead: LeadingCoefficients, coeffs: ProfileCoefficients | None = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []

    def tag(m):
        return "_".join(str(v) for v in m).replace("-", "m")

    def dump(kind, m, f):
        name = f"{kind}_{tag(m)}.csv"
        write_field_csv(out / name, op.x, f)
        entries.append({"kind": kind, "m": list(m), "shift": float(np.dot(m, op.omegas)),
                        "l2": op.l2(f), "file": name})

    for m in lead.nr1:
        dump("phi_tilde0", m, lead.phi_tilde0[m])
    for m in lead.r_min:
        dump("G", m, lead.G[m])
    manifest = {"entries": entries}
    if coeffs is not None:
        for m in lead.nr1:
            dump("psi", m, coeffs.psi[m])
        manifest.update(z2=coeffs.z2.tolist(), varpi=coeffs.varpi.tolist(),
                        residual=coeffs.residual, iterations=coeffs.iterations)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest
