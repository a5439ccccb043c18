"""Finite-difference Schrodinger operator H = -d^2/dx^2 + V on a uniform 1D grid.

Fields live on all ``n_points`` nodes with zero ghost values just outside
(Dirichlet).  Inner products use the real pairing <u, v> = Re h*sum(u*conj(v)).
"""
from __future__ import annotations

import csv
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded
from scipy.sparse import bmat, csc_matrix, diags
from scipy.sparse.linalg import splu

from .indices import FrequencyVector

W_MAX = 1e12


class SpectralError(RuntimeError):
    pass


class NoBoundStatesError(SpectralError):
    pass


class TooFewModesError(SpectralError):
    pass


class DegenerateSpectrumError(SpectralError):
    pass


class BoundaryDecayError(SpectralError):
    pass


class NearResonanceError(SpectralError):
    pass


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError("need at least 16 grid points")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @classmethod
    def symmetric(cls, half_width: float, spacing: float) -> "Grid":
        n = int(round(2 * half_width / spacing)) + 1
        return cls(-half_width, half_width, n)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)


# -- potential families -------------------------------------------------------

def gaussian_wells(centers, depths, widths):
    centers, depths, widths = (np.atleast_1d(np.asarray(a, float)) for a in (centers, depths, widths))

    def V(x):
        x = np.asarray(x, float)[..., None]
        return -np.sum(depths * np.exp(-((x - centers) / widths) ** 2), axis=-1)

    return V


def sech2(depth, scale=1.0):
    def V(x):
        return -depth / np.cosh(np.asarray(x, float) / scale) ** 2

    return V


def tabulated(path):
    """V from a CSV of (x, V) rows; a header line (e.g. the x,re,im field format) is skipped."""
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.split(",")]
        skip = 0
    except ValueError:
        skip = 1
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=skip, ndmin=2)
    xs, vs = data[:, 0], data[:, 1]

    def V(x):
        return np.interp(x, xs, vs, left=0.0, right=0.0)

    return V


def make_potential(spec: dict):
    """Build V(x) from a config dict with a ``kind`` key."""
    kind = spec.get("kind")
    if kind == "gaussian_wells":
        return gaussian_wells(spec["centers"], spec["depths"], spec["widths"])
    if kind == "sech2":
        return sech2(spec["depth"], spec.get("scale", 1.0))
    if kind == "tabulated":
        return tabulated(spec["path"])
    if kind == "zero":
        return lambda x: np.zeros_like(np.asarray(x, float))
    raise ValueError(f"unknown potential kind {kind!r}")


# -- operator -----------------------------------------------------------------

class GridOperator:
    """Tridiagonal H with its negative eigenpairs.

    Construct through :func:`build_operator`.  Instances are treated as
    immutable; the factorization cache is guarded by a lock.
    """

    def __init__(self, grid: Grid, potential: np.ndarray, omegas: np.ndarray, modes: np.ndarray):
        self.grid = grid
        self.h = grid.h
        self.x = grid.x
        self.potential = np.asarray(potential, float)
        self.diag = 2.0 / self.h**2 + self.potential
        self.offdiag = -np.ones(grid.n_points - 1) / self.h**2
        self.omegas = np.asarray(omegas, float)
        self.modes = np.asarray(modes, float)  # shape (n_points, N)
        self._lock = threading.Lock()
        self._bordered = {}

    @property
    def n_modes(self) -> int:
        return len(self.omegas)

    @property
    def frequencies(self) -> FrequencyVector:
        return FrequencyVector(tuple(self.omegas))

    def mode(self, j: int) -> np.ndarray:
        return self.modes[:, j]

    # pairings
    def inner(self, u, v) -> float:
        """Real pairing Re int u conj(v)."""
        return float(np.real(self.h * np.vdot(v, u)))

    def integral(self, u):
        return self.h * np.sum(u)

    def l2(self, u) -> float:
        return float(np.sqrt(self.h * np.sum(np.abs(u) ** 2)))

    def apply(self, u):
        u = np.asarray(u)
        out = self.diag * u
        out[:-1] += self.offdiag * u[1:]
        out[1:] += self.offdiag * u[:-1]
        return out

    def mode_coefficients(self, u) -> np.ndarray:
        """Complex coefficients c_j = int u phi_j, so that <u,phi_j> = Re c_j, <u,i phi_j> = Im c_j."""
        return self.h * (self.modes.T @ np.asarray(u))

    def project_continuous(self, u):
        u = np.asarray(u)
        c = self.mode_coefficients(u)
        return u - self.modes @ c

    # resolvents
    def _banded(self, lam, boundary):
        n = self.grid.n_points
        ab = np.zeros((3, n), dtype=complex)
        ab[0, 1:] = self.offdiag
        ab[1] = self.diag - lam
        ab[2, :-1] = self.offdiag
        if boundary == "outgoing":
            ab[1, 0] -= self._outgoing_factor(lam) / self.h**2
            ab[1, -1] -= self._outgoing_factor(lam) / self.h**2
        elif boundary != "dirichlet":
            raise ValueError(f"unknown boundary {boundary!r}")
        return ab

    def _outgoing_factor(self, lam):
        # exterior lattice solutions t^p with t + 1/t = 2 - lam h^2; keep the decaying root
        b = 2.0 - complex(lam) * self.h**2
        t = np.roots([1.0, -b, 1.0])
        if abs(np.imag(lam)) > 0:
            return t[np.argmin(np.abs(t))]
        # real lam: the outgoing branch is the limit from Im lam > 0
        t_eps = np.roots([1.0, -(b - 1e-12j * self.h**2), 1.0])
        return t[np.argmin(np.abs(t - t_eps[np.argmin(np.abs(t_eps))]))]

    def resolvent_solve(self, lam, rhs, restrict=None, boundary="dirichlet", tau=1e-10):
        """Solve (H - lam) u = rhs.

        ``restrict=j`` inverts (H - lam) on the complement of phi_j (rhs is
        projected first, output is orthogonal to phi_j).  ``boundary="outgoing"``
        replaces the Dirichlet ends by the exact outgoing condition of the
        infinite lattice with V = 0 outside the grid.
        """
        rhs = np.asarray(rhs)
        if restrict is not None:
            return self._restricted_solve(lam, rhs, restrict)
        if np.imag(lam) == 0 and boundary == "dirichlet":
            d = np.min(np.abs(self.omegas - np.real(lam)))
            if d <= tau * max(1.0, np.max(np.abs(self.omegas))):
                raise NearResonanceError(f"shift {lam} within {d:.2e} of a bound state")
        ab = self._banded(lam, boundary)
        real = np.isrealobj(rhs) and np.imag(lam) == 0 and boundary == "dirichlet"
        out = solve_banded((1, 1), ab, rhs.astype(complex), check_finite=False)
        return out.real if real else out

    def _restricted_solve(self, lam, rhs, j):
        lam = float(np.real(lam))
        key = (j, lam)
        with self._lock:
            lu = self._bordered.get(key)
            if lu is None:
                n = self.grid.n_points
                A = diags([self.offdiag, self.diag - lam, self.offdiag], [-1, 0, 1], format="csc")
                b = csc_matrix(self.h * self.modes[:, j].reshape(n, 1))
                M = bmat([[A, b], [b.T, None]], format="csc")
                lu = splu(M)
                self._bordered[key] = lu
        phi = self.modes[:, j]
        rhs = rhs - phi * (self.h * np.dot(phi, rhs))
        if np.iscomplexobj(rhs):
            sol = lu.solve(np.append(rhs.real, 0.0))[:-1] + 1j * lu.solve(np.append(rhs.imag, 0.0))[:-1]
        else:
            sol = lu.solve(np.append(rhs, 0.0))[:-1]
        return sol

    def resolvent_norm_probe(self, eps=1e-3, n_rhs=4, seed=0) -> float:
        """Heuristic check that (H - i eps)^-1 stays bounded near zero energy."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_rhs):
            f = self.project_continuous(rng.standard_normal(self.grid.n_points) * np.exp(-self.x**2 / 50))
            for s in (1, -1):
                u = self.resolvent_solve(s * 1j * eps, f, boundary="outgoing")
                worst = max(worst, self.l2(u) / self.l2(f))
        return worst


def build_operator(grid: Grid, potential, *, tau_decay=1e-8, boundary_tol=1e-12,
                   gap_rel=1e-6, residual_tol=1e-10) -> GridOperator:
    """Assemble H on ``grid`` and compute its negative eigenpairs.

    ``potential`` is either a callable V(x) or an array on the grid.  Raises
    if V does not decay at the edges, if fewer than two bound states exist,
    if two eigenvalues are closer than ``gap_rel * max|omega|``, or if a bound
    state is not negligible at the boundary.
    """
    x = grid.x
    V = np.asarray(potential(x) if callable(potential) else potential, float)
    if V.shape != x.shape:
        raise ValueError("potential does not match the grid")
    n = grid.n_points
    outer = max(1, n // 10)
    edge = np.concatenate([V[:outer], V[-outer:]])
    if np.max(np.abs(edge)) >= tau_decay:
        raise BoundaryDecayError(f"|V| = {np.max(np.abs(edge)):.2e} on the outer 10% of the grid")

    h = grid.h
    d = 2.0 / h**2 + V
    e = -np.ones(n - 1) / h**2
    lo = min(0.0, float(np.min(V))) - 1.0
    if lo >= 0 or np.min(V) >= 0:
        raise NoBoundStatesError("potential has no negative part: no bound states")
    # stebz (bisection) + stein (inverse iteration)
    w, v = eigh_tridiagonal(d, e, select="v", select_range=(lo, 0.0), lapack_driver="stebz")
    keep = w < 0
    w, v = w[keep], v[:, keep]
    if len(w) == 0:
        raise NoBoundStatesError("no negative eigenvalues")
    if len(w) < 2:
        raise TooFewModesError(f"only {len(w)} bound state(s); need N >= 2")
    gaps = np.diff(w)
    if np.min(gaps) <= gap_rel * np.max(np.abs(w)):
        raise DegenerateSpectrumError(f"eigenvalue gap {np.min(gaps):.2e} too small")
    v = v / np.sqrt(h * np.sum(v**2, axis=0))
    for j in range(v.shape[1]):
        i = int(np.argmax(np.abs(v[:, j])))
        if v[i, j] < 0:
            v[:, j] = -v[:, j]
    op = GridOperator(grid, V, w, v)
    for j in range(len(w)):
        r = op.l2(op.apply(v[:, j]) - w[j] * v[:, j])
        if r > residual_tol:
            raise SpectralError(f"eigenpair {j} residual {r:.2e}")
        edge_val = max(abs(v[0, j]), abs(v[-1, j]))
        if edge_val >= boundary_tol:
            raise BoundaryDecayError(f"mode {j} is {edge_val:.2e} at the boundary; enlarge the domain")
    return op


# -- norms and I/O ------------------------------------------------------------

@dataclass(frozen=True)
class WeightedNorm:
    gamma0: float = 0.0
    s: int = 0

    def __post_init__(self):
        if self.gamma0 < 0:
            raise ValueError("gamma0 must be >= 0")
        if self.s not in (0, 1):
            raise ValueError("s must be 0 or 1")


def default_gamma0(omegas) -> float:
    return 0.5 * float(np.min(np.sqrt(-np.asarray(omegas))))


def weighted_norm(op_or_grid, u, norm: WeightedNorm) -> float:
    grid = op_or_grid.grid if isinstance(op_or_grid, GridOperator) else op_or_grid
    h, x = grid.h, grid.x
    w = np.minimum(np.cosh(np.minimum(norm.gamma0 * np.abs(x), 700.0)), W_MAX)
    wu = w * np.asarray(u)
    total = h * np.sum(np.abs(wu) ** 2)
    if norm.s == 1:
        du = np.gradient(wu, h)
        total += h * np.sum(np.abs(du) ** 2)
    return float(np.sqrt(total))


def write_field_csv(path, x, u):
    u = np.asarray(u)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "re", "im"])
        for xi, ui in zip(x, u):
            wr.writerow([f"{xi:.12g}", f"{np.real(ui):.17g}", f"{np.imag(ui):.17g}"])


def read_field_csv(path):
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1)
    return data[:, 0], data[:, 1] + 1j * data[:, 2]
