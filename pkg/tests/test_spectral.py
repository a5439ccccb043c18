import numpy as np
import pytest

from refprofile.spectral import (BoundaryDecayError, Grid, NearResonanceError, NoBoundStatesError,
                                 TooFewModesError, WeightedNorm, build_operator, default_gamma0,
                                 gaussian_wells, make_potential, read_field_csv, sech2, weighted_norm,
                                 write_field_csv)

from oracles import poschl_teller_levels


def test_grid():
    g = Grid.symmetric(10, 0.5)
    assert g.n_points == 41 and g.h == pytest.approx(0.5)
    assert g.x[0] == -10 and g.x[-1] == 10
    with pytest.raises(ValueError):
        Grid(0, 1, 4)


def test_poschl_teller_levels():
    g = Grid(-40, 40, 4001)
    op = build_operator(g, sech2(6.0))
    assert np.allclose(op.omegas, poschl_teller_levels(2), atol=5e-4)


def test_modes_are_orthonormal_and_signed(default_op):
    op = default_op
    gram = op.h * op.modes.T @ op.modes
    assert np.allclose(gram, np.eye(op.n_modes), atol=1e-12)
    for j in range(op.n_modes):
        phi = op.mode(j)
        assert phi[np.argmax(np.abs(phi))] > 0
        assert op.l2(op.apply(phi) - op.omegas[j] * phi) < 1e-10


def test_default_frequencies(default_op):
    assert default_op.omegas == pytest.approx([-0.99697785, -0.40231076], abs=1e-7)


def test_build_errors():
    g = Grid.symmetric(40, 0.1)
    with pytest.raises(NoBoundStatesError):
        build_operator(g, make_potential({"kind": "zero"}))
    with pytest.raises(TooFewModesError):
        build_operator(g, gaussian_wells([0.0], [0.5], [1.0]))
    with pytest.raises(BoundaryDecayError):
        build_operator(g, lambda x: -1.0 / (1 + 0.001 * x**2))
    # the second mode of the default wells reaches the edge of a small box
    with pytest.raises(BoundaryDecayError):
        build_operator(Grid.symmetric(12, 0.1), gaussian_wells([-1.5, 1.5], [2.0, 1.2], [1.0, 1.0]))


def test_resolvent_on_eigenvector(default_op):
    op = default_op
    for lam in (-2.0, -0.7, 0.3 + 0.1j):
        u = op.resolvent_solve(lam, op.mode(0))
        assert np.max(np.abs(u - op.mode(0) / (op.omegas[0] - lam))) < 1e-10


def test_resolvent_near_eigenvalue_raises(default_op):
    with pytest.raises(NearResonanceError):
        default_op.resolvent_solve(default_op.omegas[1], default_op.mode(0))


def test_restricted_solve(default_op, rng):
    op = default_op
    f = rng.standard_normal(op.grid.n_points) * np.exp(-op.x**2 / 20)
    for j in range(op.n_modes):
        u = op.resolvent_solve(op.omegas[j], f, restrict=j)
        assert abs(op.h * np.dot(u, op.mode(j))) < 1e-12
        pf = f - op.mode(j) * op.h * np.dot(op.mode(j), f)
        assert op.l2(op.apply(u) - op.omegas[j] * u - pf) < 1e-9 * op.l2(f)


def test_outgoing_resolvent_is_dissipative(default_op, rng):
    op = default_op
    f = op.project_continuous(np.exp(-op.x**2))
    for lam in (0.05, 0.2, 1.0):
        u = op.resolvent_solve(lam, f.astype(complex), boundary="outgoing")
        assert op.h * np.imag(np.dot(f, u)) > 0
    assert 0 < op.resolvent_norm_probe() < 1e3


def test_projection(default_op, rng):
    op = default_op
    u = rng.standard_normal(op.grid.n_points) + 1j * rng.standard_normal(op.grid.n_points)
    pu = op.project_continuous(u)
    assert np.max(np.abs(op.mode_coefficients(pu))) < 1e-12
    assert np.allclose(op.project_continuous(pu), pu)


def test_weighted_norm(default_op):
    op = default_op
    u = np.exp(-op.x**2)
    assert weighted_norm(op, u, WeightedNorm(0.0, 0)) == pytest.approx(op.l2(u))
    assert weighted_norm(op, u, WeightedNorm(0.5, 0)) > op.l2(u)
    assert weighted_norm(op, u, WeightedNorm(0.5, 1)) > weighted_norm(op, u, WeightedNorm(0.5, 0))
    assert default_gamma0(op.omegas) == pytest.approx(0.5 * np.sqrt(0.40231076), rel=1e-6)
    with pytest.raises(ValueError):
        WeightedNorm(0.1, 2)


def test_field_csv_roundtrip(tmp_path):
    x = np.linspace(-1, 1, 5)
    u = np.exp(1j * x) * (1 + x)
    write_field_csv(tmp_path / "f.csv", x, u)
    x2, u2 = read_field_csv(tmp_path / "f.csv")
    assert np.allclose(x2, x) and np.allclose(u2, u, atol=1e-15)


def test_tabulated_potential(tmp_path):
    g = Grid.symmetric(40, 0.1)
    xs = np.linspace(-10, 10, 401)
    np.savetxt(tmp_path / "v.csv", np.column_stack([xs, -6 / np.cosh(xs) ** 2]), delimiter=",")
    op = build_operator(g, make_potential({"kind": "tabulated", "path": str(tmp_path / "v.csv")}))
    assert op.omegas == pytest.approx([-4, -1], abs=1e-2)
