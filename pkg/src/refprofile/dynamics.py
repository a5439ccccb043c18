"""Time integration, modulation coordinates and selection diagnostics."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.fft import dst
from scipy.linalg import eigh_tridiagonal, solve_banded

from .indices import IndexTables, monomial_eval
from .profile import (LeadingCoefficients, NonlinearitySpec, ProfileCoefficients, eval_profile,
                      solve_profile)
from .spectral import GridOperator

log = logging.getLogger(__name__)

TAU_MOD = 1e-10
SCHEMES = ("strang", "strang-dst", "cn")


class DynamicsError(RuntimeError):
    pass


class InstabilityError(DynamicsError):
    pass


class ModulationRadiusError(DynamicsError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.05
    T: float = 100.0
    scheme: str = "strang"  # "strang" (exact linear step), "strang-dst" or "cn"
    sponge_width: float = 0.2  # fraction of the half-width, at each end
    sponge_strength: float = 1.0
    blowup_factor: float = 10.0
    cn_tol: float = 1e-13

    def validate(self, omegas=None):
        if self.dt <= 0 or self.T < 0:
            raise ValueError("need dt > 0 and T >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.sponge_width <= 0.4:
            raise ValueError("sponge must leave the inner 60% of the domain untouched")
        if self.sponge_strength < 0:
            raise ValueError("sponge strength must be >= 0")
        if omegas is not None and self.dt * np.max(np.abs(omegas)) >= 0.5:
            raise ValueError(f"dt*max|omega| = {self.dt * np.max(np.abs(omegas)):.3f} >= 0.5")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def sponge_profile(x, width, strength):
    """Quadratic ramp sigma(x) >= 0 over the outer ``width`` fraction of each half."""
    L = max(abs(x[0]), abs(x[-1]))
    if width <= 0 or strength == 0:
        return np.zeros_like(x)
    x0 = (1 - width) * L
    s = np.clip((np.abs(x) - x0) / (L - x0), 0, None)
    return strength * s**2


def inner_mask(x, frac=0.6):
    L = max(abs(x[0]), abs(x[-1]))
    return np.abs(x) <= frac * L


# -- energy ------------------------------------------------------------------------

def energy(op: GridOperator, nl: NonlinearitySpec, u) -> float:
    """E(u) = 1/2 <Hu, u> + 1/2 int G(|u|^2)."""
    u = np.asarray(u)
    kin = op.h * np.real(np.vdot(u, op.apply(u)))
    pot = op.integral(nl.antiderivative(np.abs(u) ** 2))
    return float(0.5 * kin + 0.5 * pot)


def energy_split(op: GridOperator, nl: NonlinearitySpec, u) -> float:
    """Same quantity through the bound-state expansion plus the continuous remainder."""
    u = np.asarray(u)
    c = op.mode_coefficients(u)
    rest = u - op.modes @ c
    disc = float(np.sum(op.omegas * np.abs(c) ** 2))
    cont = op.h * np.real(np.vdot(rest, op.apply(rest)))
    return float(0.5 * (disc + cont) + 0.5 * op.integral(nl.antiderivative(np.abs(u) ** 2)))


def mass(op, u) -> float:
    return float(op.h * np.sum(np.abs(u) ** 2))


# -- propagators ---------------------------------------------------------------

class Propagator:
    """One-step maps for i u_t = H u + g(|u|^2) u - i sigma u.

    ``strang``: exp(-i H dt) applied exactly in the eigenbasis of H between
    two pointwise half steps of the nonlinearity and sponge.
    ``strang-dst``: kinetic part by a sine transform, potential joins the
    pointwise half steps.  ``cn``: Crank-Nicolson, midpoint nonlinearity.
    """

    def __init__(self, op: GridOperator, nl: NonlinearitySpec, cfg: IntegratorConfig):
        self.op, self.nl, self.cfg = op, nl, cfg.validate(op.omegas)
        n = op.grid.n_points
        self.sigma = sponge_profile(op.x, cfg.sponge_width, cfg.sponge_strength)
        self.damp_half = np.exp(-self.sigma * cfg.dt / 2)
        self.ref_sup = None
        if cfg.scheme == "strang":
            w, self._basis = eigh_tridiagonal(op.diag, op.offdiag)
            self._phase = np.exp(-1j * w * cfg.dt)
            self._pointwise = np.zeros(n)
        elif cfg.scheme == "strang-dst":
            k = np.arange(1, n + 1)
            mu = (2 - 2 * np.cos(k * np.pi / (n + 1))) / op.h**2
            self.kinetic = np.exp(-1j * mu * cfg.dt)
            self._pointwise = op.potential
        else:
            self._cn_setup()

    def _half_nonlinear(self, u):
        tau = self.cfg.dt / 2
        phase = self._pointwise + self.nl(np.abs(u) ** 2)
        return u * np.exp(-1j * phase * tau) * self.damp_half

    def _linear(self, u):
        if self.cfg.scheme == "strang":
            B = self._basis
            c = B.T @ np.column_stack([u.real, u.imag])
            c = self._phase * (c[:, 0] + 1j * c[:, 1])
            out = B @ np.column_stack([c.real, c.imag])
            return out[:, 0] + 1j * out[:, 1]
        return dst(self.kinetic * dst(u, type=1, norm="ortho"), type=1, norm="ortho")

    def _strang(self, u):
        u = self._half_nonlinear(u)
        u = self._linear(u)
        return self._half_nonlinear(u)

    def _cn_setup(self):
        op, dt = self.op, self.cfg.dt
        n = op.grid.n_points
        self._ab = np.zeros((3, n), complex)
        self._ab[0, 1:] = 0.5j * dt * op.offdiag
        self._ab[2, :-1] = 0.5j * dt * op.offdiag
        self._lin_diag = op.diag - 1j * self.sigma

    def _cn(self, u):
        # (1 + i dt/2 A(w)) u+ = (1 - i dt/2 A(w)) u, A(w) = H - i sigma + g(|w|^2), w = (u + u+)/2
        op, dt = self.op, self.cfg.dt
        new = u.copy()
        for _ in range(50):
            w = 0.5 * (u + new)
            d = self._lin_diag + self.nl(np.abs(w) ** 2)
            rhs = u - 0.5j * dt * (d * u)
            rhs[:-1] -= 0.5j * dt * op.offdiag * u[1:]
            rhs[1:] -= 0.5j * dt * op.offdiag * u[:-1]
            self._ab[1] = 1 + 0.5j * dt * d
            nxt = solve_banded((1, 1), self._ab, rhs, check_finite=False)
            err = np.max(np.abs(nxt - new))
            new = nxt
            if err <= self.cfg.cn_tol * max(np.max(np.abs(new)), 1e-300) or self.nl.is_linear:
                break
        return new

    def step(self, u):
        u = np.asarray(u, complex)
        if self.ref_sup is None:
            self.ref_sup = float(np.max(np.abs(u)))
        out = self._cn(u) if self.cfg.scheme == "cn" else self._strang(u)
        sup = float(np.max(np.abs(out)))
        if not np.isfinite(sup) or (self.ref_sup > 0 and sup > self.cfg.blowup_factor * self.ref_sup):
            raise InstabilityError(f"sup norm grew to {sup:.3e} (initial {self.ref_sup:.3e})")
        return out

    def run(self, u, n_steps, callback=None):
        for i in range(n_steps):
            u = self.step(u)
            if callback is not None:
                callback(i + 1, u)
        return u


def step(u, op, nl, cfg):
    """Advance u by one step of cfg.dt; use :class:`Propagator` directly for long runs."""
    return Propagator(op, nl, cfg).step(u)


# -- modulation --------------------------------------------------------------------

class ProfileCache:
    """Profile coefficients keyed by |z|^2, re-solved once the base point drifts past ``refresh_tol``."""

    def __init__(self, op, nl, tables: IndexTables, lead: LeadingCoefficients, refresh_tol=1e-6):
        self.op, self.nl, self.tables, self.lead = op, nl, tables, lead
        self.refresh_tol = float(refresh_tol)
        self.current: ProfileCoefficients | None = None
        self.solves = 0

    @property
    def stale_tol(self) -> float:
        return self.refresh_tol * (1 + 1e-9) + 1e-300

    def get(self, z) -> ProfileCoefficients:
        z2 = np.abs(np.asarray(z, complex)) ** 2
        c = self.current
        if c is not None and np.max(np.abs(z2 - c.z2)) <= self.refresh_tol:
            return c
        self.current = solve_profile(self.op, self.nl, self.tables, self.lead, z2, guess=c)
        self.solves += 1
        return self.current

    def phi(self, z):
        return eval_profile(self.lead, self.get(z), z, stale_tol=self.stale_tol)


def modulate(op: GridOperator, lead: LeadingCoefficients, cache: ProfileCache, u, z_guess=None,
             *, tol=TAU_MOD, max_iter=50):
    """Find z with int (phi(z) - u) phi_j = 0 for all j (real and imaginary parts); eta = u - phi(z).

    The Jacobian of z -> int phi(z) phi_j is I + O(|z|^2), so a chord
    iteration with the identity converges quickly at small amplitude.
    """
    u = np.asarray(u, complex)
    target = op.mode_coefficients(u)
    z = target.copy() if z_guess is None else np.asarray(z_guess, complex).copy()
    res = np.inf
    prev = np.inf
    for _ in range(max_iter):
        phi = cache.phi(z)
        F = op.mode_coefficients(phi) - target
        res = float(np.max(np.abs(F)))
        if res <= tol:
            return z, u - phi, res
        if res > 2 * prev and res > 1e3 * tol:
            break
        prev = res
        z = z - F
    raise ModulationRadiusError(f"modulation did not converge (residual {res:.2e})")


# -- selection run -------------------------------------------------------------------

@dataclass
class SelectionSeries:
    t: np.ndarray
    zabs: np.ndarray  # shape (n_samples, N)
    E_profile: np.ndarray
    mass: np.ndarray
    sum_zm2: np.ndarray
    eta_l2_inner: np.ndarray
    eta_l6_inner: np.ndarray
    cum_zm2: np.ndarray  # int_0^t sum_m |z^m|^2
    cum_weighted: np.ndarray  # int_0^t sum_m lambda_m Gamma_m |z^m|^2
    energy_total: np.ndarray
    orth_residual: np.ndarray
    pc_drift: np.ndarray

    def columns(self):
        N = self.zabs.shape[1]
        head = ["t"] + [f"abs_z{j + 1}" for j in range(N)] + ["E_profile", "mass", "sum_zm2", "eta_l2_inner",
                                                             "eta_l6_inner", "cum_zm2", "cum_weighted",
                                                             "energy_total", "orth_residual", "pc_drift"]
        cols = [self.t] + [self.zabs[:, j] for j in range(N)] + [
            self.E_profile, self.mass, self.sum_zm2, self.eta_l2_inner, self.eta_l6_inner, self.cum_zm2,
            self.cum_weighted, self.energy_total, self.orth_residual, self.pc_drift]
        return head, cols


@dataclass
class Verdict:
    survivor: int  # 0-based mode index maximizing the final |z_j|
    decided: bool
    decay_ratios: list  # |z_j(T)| / |z_j(0)|
    margin: float  # final |z_survivor| / max of the others

    def to_dict(self):
        return asdict(self)


@dataclass
class SelectionReport:
    series: SelectionSeries
    verdict: Verdict
    z_final: np.ndarray
    profile_solves: int
    config: IntegratorConfig
    energy_trend: dict = field(default_factory=dict)


def selection_verdict(zabs, threshold=5.0) -> Verdict:
    zabs = np.asarray(zabs)
    final = zabs[-1]
    j0 = int(np.argmax(final))
    others = np.delete(final, j0)
    top = float(np.max(others)) if others.size else 0.0
    margin = float(final[j0] / top) if top > 0 else math.inf
    start = zabs[0]
    ratios = [float(f / s) if s > 0 else float("nan") for f, s in zip(final, start)]
    return Verdict(j0, bool(final[j0] > 0 and margin >= threshold), ratios, margin)


def trend(t, y):
    """Least-squares slope of y(t), with the residual scatter for comparison."""
    t, y = np.asarray(t), np.asarray(y)
    if len(t) < 3 or np.ptp(t) == 0:
        return {"slope": 0.0, "change": 0.0, "noise": 0.0, "decreasing": False}
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    noise = float(np.std(resid))
    change = float(coef[0] * np.ptp(t))
    return {"slope": float(coef[0]), "change": change, "noise": noise,
            "decreasing": bool(change < -3 * noise and change < 0)}


def run_selection(op: GridOperator, nl: NonlinearitySpec, tables: IndexTables, lead: LeadingCoefficients,
                  cfg: IntegratorConfig, z0, *, perturbation=None, sample_every=20, refresh_tol=1e-6,
                  gammas=None, verdict_threshold=5.0) -> SelectionReport:
    """Integrate from u0 = phi(z0) (+ perturbation) and record modulation diagnostics.

    ``gammas`` maps m in R_min to Gamma_m; it feeds the weighted cumulative
    column used by :func:`fgr_dissipation_diagnostic`.
    """
    z = np.asarray(z0, complex)
    prop = Propagator(op, nl, cfg)
    cache = ProfileCache(op, nl, tables, lead, refresh_tol)
    u = cache.phi(z)
    if perturbation is not None:
        u = u + op.project_continuous(np.asarray(perturbation, complex))
    z, eta, res = modulate(op, lead, cache, u, z)
    mask = inner_mask(op.x)
    r_min = list(lead.r_min)
    lam = np.array([float(np.dot(m, op.omegas)) for m in r_min])
    gam = np.array([float((gammas or {}).get(m, 0.0)) for m in r_min])
    rows = {k: [] for k in ("t", "zabs", "E", "mass", "szm", "e2", "e6", "cum", "cw", "Etot", "orth", "pc")}
    cum = cw = 0.0

    def zm2(z):
        return np.array([abs(monomial_eval(z, m)) ** 2 for m in r_min])

    prev = zm2(z)

    def record(t, u, z, eta, res):
        rows["t"].append(t)
        rows["zabs"].append(np.abs(z))
        rows["E"].append(energy(op, nl, cache.phi(z)))
        rows["mass"].append(mass(op, u))
        rows["szm"].append(float(prev.sum()))
        rows["e2"].append(float(np.sqrt(op.h * np.sum(np.abs(eta[mask]) ** 2))))
        rows["e6"].append(float((op.h * np.sum(np.abs(eta[mask]) ** 6)) ** (1 / 6)))
        rows["cum"].append(cum)
        rows["cw"].append(cw)
        rows["Etot"].append(energy(op, nl, u))
        rows["orth"].append(res)
        rows["pc"].append(float(np.max(np.abs(op.mode_coefficients(eta)))) if np.any(eta) else 0.0)

    record(0.0, u, z, eta, res)
    worst = res
    n = cfg.n_steps
    for i in range(1, n + 1):
        u = prop.step(u)
        z, eta, res = modulate(op, lead, cache, u, z)
        worst = max(worst, res)
        cur = zm2(z)
        cum += 0.5 * cfg.dt * float(np.sum(prev + cur))
        cw += 0.5 * cfg.dt * float(np.sum(lam * gam * (prev + cur)))
        prev = cur
        if i % sample_every == 0 or i == n:
            record(i * cfg.dt, u, z, eta, res)

    s = SelectionSeries(np.array(rows["t"]), np.array(rows["zabs"]), np.array(rows["E"]), np.array(rows["mass"]),
                        np.array(rows["szm"]), np.array(rows["e2"]), np.array(rows["e6"]), np.array(rows["cum"]),
                        np.array(rows["cw"]), np.array(rows["Etot"]), np.array(rows["orth"]), np.array(rows["pc"]))
    verdict = selection_verdict(s.zabs, verdict_threshold)
    return SelectionReport(s, verdict, z, cache.solves, cfg, trend(s.t, s.E_profile))


@dataclass
class DissipationFit:
    slope: float
    correlation: float
    inconclusive: bool
    n_windows: int

    def to_dict(self):
        return asdict(self)


def fgr_dissipation_diagnostic(series: SelectionSeries, n_windows: int = 10, floor: float = 1e-14) -> DissipationFit:
    """Regress the cumulative drop of E(phi(z)) on int sum_m lambda_m Gamma_m |z^m|^2.

    Windows are consecutive blocks of samples; each window contributes
    (x, y) = (increment of the weighted integral, decrease of E(phi(z))).
    The ideal slope is 1.
    """
    t = series.t
    if len(t) < 3:
        return DissipationFit(float("nan"), float("nan"), True, 0)
    edges = np.unique(np.linspace(0, len(t) - 1, n_windows + 1).round().astype(int))
    # average E over each window to suppress fast oscillations, cumulative quantities at the window centres
    E_mean = np.array([series.E_profile[a:b + 1].mean() for a, b in zip(edges[:-1], edges[1:])])
    X_mean = np.array([series.cum_weighted[a:b + 1].mean() for a, b in zip(edges[:-1], edges[1:])])
    y = -(E_mean - E_mean[0])
    x = X_mean - X_mean[0]
    if len(x) < 3 or np.ptp(x) <= floor or np.ptp(y) <= floor:
        return DissipationFit(float("nan"), float("nan"), True, len(x))
    slope = float(np.dot(x, y) / np.dot(x, x))
    corr = float(np.corrcoef(x, y)[0, 1])
    return DissipationFit(slope, corr, False, len(x))


# -- output ------------------------------------------------------------------------

def write_series_csv(path, series: SelectionSeries, digits=12):
    head, cols = series.columns()
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(head)
        for row in zip(*cols):
            wr.writerow([f"{v:.{digits}e}" for v in row])


def write_manifest(path, payload: dict):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))
