"""Fermi Golden Rule coefficients by limiting absorption.

Gamma(eps) = <i G, (H - lam - i eps)^-1 G> with the real pairing
<u, v> = Re int u conj(v).  For real G this is h * Im(G^T R G) >= 0.  The
resolvent is taken with exact outgoing boundary conditions for the free
lattice outside the box, so Gamma(eps) is a smooth function of eps and the
limit eps -> 0 is reached by Richardson extrapolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .indices import basis, enumerate_A, norm1
from .profile import LeadingCoefficients, NonlinearitySpec
from .spectral import GridOperator

TAU_FGR = 1e-8


class FgrError(RuntimeError):
    pass


class UnresolvedResonanceError(FgrError):
    """Gamma(eps) is not stable along the eps ladder."""


class FgrAssumptionError(FgrError):
    pass


@dataclass
class FgrCoefficient:
    m: tuple
    lam: float
    gamma: float
    epsilon_ladder: list
    samples: list
    raw: float = 0.0  # Gamma at the smallest eps, before extrapolation

    @property
    def stability(self) -> float:
        """|Gamma(eps) - Gamma(eps/2)| / Gamma at the finest pair."""
        a, b = self.samples[-2], self.samples[-1]
        return abs(a - b) / max(abs(self.gamma), 1e-300)

    def to_dict(self) -> dict:
        return {"m": list(self.m), "lambda": self.lam, "gamma": self.gamma, "gamma_raw": self.raw,
                "ladder": [[e, s] for e, s in zip(self.epsilon_ladder, self.samples)],
                "stability": self.stability}


def default_eps_ladder(lam: float, h: float | None = None, boundary="outgoing") -> list:
    base = min(lam, 1.0)
    ladder = [f * base for f in (0.2, 0.1, 0.05, 0.025)]
    if boundary == "dirichlet" and h is not None:
        # a closed box only resolves eps well above the level spacing
        floor = 50 * h * h
        ladder = [max(e, floor * 2 ** -i) for i, e in enumerate(ladder)]
    return ladder


def fgr_form(op: GridOperator, u, v, lam: float, eps: float, boundary="outgoing") -> float:
    """Symmetric bilinear form h * Im(u^T (H - lam - i eps)^-1 v) on P_c-projected real fields."""
    u = op.project_continuous(np.asarray(u, float))
    v = op.project_continuous(np.asarray(v, float))
    w = op.resolvent_solve(lam + 1j * eps, v.astype(complex), boundary=boundary)
    return float(op.h * np.imag(np.dot(u, w)))


def _extrapolate(ladder, samples):
    # Gamma(eps) ~ Gamma_0 + c eps from the two finest points
    e1, e2 = ladder[-2], ladder[-1]
    s1, s2 = samples[-2], samples[-1]
    return (e1 * s2 - e2 * s1) / (e1 - e2)


def _check_ladder(ladder):
    if len(ladder) < 2:
        raise ValueError("eps ladder needs at least two points")
    if any(b >= a for a, b in zip(ladder, ladder[1:])) or ladder[-1] <= 0:
        raise ValueError("eps ladder must be strictly decreasing and positive")


def form_extrapolated(op, u, v, lam, eps_ladder, boundary="outgoing"):
    _check_ladder(eps_ladder)
    samples = [fgr_form(op, u, v, lam, e, boundary) for e in eps_ladder]
    return _extrapolate(eps_ladder, samples), samples


def compute_gamma(op: GridOperator, G_m, lam: float, eps_ladder=None, *, m=(), boundary="outgoing",
                  tau=TAU_FGR, max_rel_jump=0.5) -> FgrCoefficient:
    if not lam > 0:
        raise ValueError(f"lambda = {lam} is not embedded in the continuous spectrum")
    G_m = np.asarray(G_m)
    if np.iscomplexobj(G_m):
        if np.any(np.imag(G_m)):
            raise ValueError("G_m must be real")
        G_m = G_m.real
    ladder = list(eps_ladder) if eps_ladder is not None else default_eps_ladder(lam, op.h, boundary)
    gamma, samples = form_extrapolated(op, G_m, G_m, lam, ladder, boundary)
    scale = max(abs(s) for s in samples)
    if scale > tau:
        if min(samples) < -tau * scale:
            raise UnresolvedResonanceError(f"negative Gamma(eps) on the ladder: {samples}")
        jump = abs(samples[-2] - samples[-1]) / max(abs(gamma), 1e-300)
        if jump > max_rel_jump:
            raise UnresolvedResonanceError(
                f"Gamma(eps) unstable (relative jump {jump:.2f}); refine the grid or enlarge the domain")
    return FgrCoefficient(tuple(m), float(lam), float(gamma), ladder, samples, raw=samples[-1])


def histogram_gamma(op: GridOperator, G_m, lam: float, *, half_width=None, window=None) -> float:
    """pi * spectral density of G_m at lam from a closed box much larger than the grid.

    The operator is re-discretized with the same spacing on a box
    ``half_width`` wide (potential zero-padded), eigenpairs near lam are
    found by bisection and |<G, v_k>|^2 is averaged over an energy window.
    """
    h = op.h
    x0 = op.x
    if half_width is None:
        half_width = 10 * max(abs(x0[0]), abs(x0[-1]))
    k = math.sqrt(lam)
    spacing = 2 * k * math.pi / (2 * half_width)  # dE near lam in a box of length 2 * half_width
    if window is None:
        window = 30 * spacing
    n_side = int(round(half_width / h))
    x = h * np.arange(-n_side, n_side + 1)
    V = np.zeros_like(x)
    i0 = int(round(x0[0] / h)) + n_side
    V[i0:i0 + len(x0)] = op.potential
    G = np.zeros_like(x)
    G[i0:i0 + len(x0)] = op.project_continuous(np.asarray(G_m, float))
    d = 2.0 / h**2 + V
    e = -np.ones(len(x) - 1) / h**2
    w, vecs = eigh_tridiagonal(d, e, select="v", select_range=(lam - window, lam + window),
                               lapack_driver="stebz")
    if len(w) < 5:
        raise FgrError("too few eigenvalues in the histogram window")
    vecs = vecs / math.sqrt(h)
    weights = (h * (vecs.T @ G)) ** 2
    return float(math.pi * weights.sum() / (2 * window))


@dataclass
class FgrReport:
    ok: bool
    tau: float
    failing: list = field(default_factory=list)
    marginal: list = field(default_factory=list)
    coefficients: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "tau": self.tau, "failing": [list(m) for m in self.failing],
                "marginal": [list(m) for m in self.marginal],
                "coefficients": [c.to_dict() for c in self.coefficients]}


def check_fgr_assumption(coeffs, tau: float = TAU_FGR, margin: float = 10.0) -> FgrReport:
    """True iff every gamma exceeds tau; gammas within ``margin * tau`` are flagged."""
    coeffs = list(coeffs)
    failing = [c.m for c in coeffs if not c.gamma > tau]
    marginal = [c.m for c in coeffs if tau < c.gamma <= margin * tau]
    return FgrReport(not failing and bool(coeffs), tau, failing, marginal, coeffs)


def gammas_for(op: GridOperator, lead: LeadingCoefficients, eps_fractions=None, boundary="outgoing", tau=TAU_FGR):
    """One coefficient per m in R_min; the ladder is eps_fractions * min(lambda, 1)."""
    out = []
    for m in lead.r_min:
        lam = float(np.dot(m, op.omegas))
        ladder = None if eps_fractions is None else [e * min(lam, 1.0) for e in eps_fractions]
        out.append(compute_gamma(op, lead.G[m], lam, ladder, m=m, boundary=boundary, tau=tau))
    return out


@dataclass
class GenericityEntry:
    m: tuple
    L: int
    N: int
    a: float
    b: float
    c: float
    roots: list
    actual_x: float = float("nan")
    gamma_at_actual: float = float("nan")

    def to_dict(self) -> dict:
        return {"m": list(self.m), "L": self.L, "N": self.N, "a": self.a, "b": self.b, "c": self.c,
                "roots": [[float(np.real(r)), float(np.imag(r))] for r in self.roots],
                "actual_x": self.actual_x, "gamma_at_actual": self.gamma_at_actual}


def genericity_quadratic(op: GridOperator, nl: NonlinearitySpec, lead: LeadingCoefficients, m,
                         eps_ladder=None, boundary="outgoing", tau=TAU_FGR) -> GenericityEntry:
    """Gamma_m as a quadratic in x = g^(L)(0), L = (||m|| - 1)/2, lower Taylor coefficients fixed.

    G_m = x (N_m / L!) phi^|m| + K_m where N_m counts A(L, m) over the basis
    indices and K_m collects the terms of order k < L.
    """
    m = tuple(m)
    if m not in lead.r_min:
        raise ValueError(f"{m} is not a minimal resonant index")
    n = op.n_modes
    L = (norm1(m) - 1) // 2
    nr0 = [basis(j, n) for j in range(n)]
    N_m = len(enumerate_A(L, m, nr0))
    phi_m = np.prod([op.modes[:, j] ** abs(mj) for j, mj in enumerate(m)], axis=0)
    K = np.zeros(op.grid.n_points)
    for k in range(1, L):
        c = nl.coefficient(k)
        for tup in enumerate_A(k, m, lead.nr1):
            K = K + c * np.prod([lead.phi_tilde0[t] for t in tup], axis=0)
    lam = float(np.dot(m, op.omegas))
    ladder = list(eps_ladder) if eps_ladder is not None else default_eps_ladder(lam, op.h, boundary)
    w = N_m / math.factorial(L)
    a = w * w * form_extrapolated(op, phi_m, phi_m, lam, ladder, boundary)[0]
    if a <= tau:
        raise FgrAssumptionError(f"simplified FGR condition fails for {m}: a = {a:.3e}")
    if np.any(K):
        b = 2 * w * form_extrapolated(op, phi_m, K, lam, ladder, boundary)[0]
        c = form_extrapolated(op, K, K, lam, ladder, boundary)[0]
    else:
        b = c = 0.0
    roots = list(np.unique(np.roots([a, b, c]))) if (b or c) else [0.0]
    x = nl.derivative_at_zero(L)
    return GenericityEntry(m, L, N_m, float(a), float(b), float(c), roots, float(x),
                           float(a * x * x + b * x + c))
