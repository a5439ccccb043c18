import json
from pathlib import Path

import numpy as np
import pytest

from refprofile.fgr import (FgrCoefficient, UnresolvedResonanceError, check_fgr_assumption, compute_gamma,
                            default_eps_ladder, fgr_form, gammas_for, genericity_quadratic, histogram_gamma)
from refprofile.indices import basis, enumerate_tables
from refprofile.profile import NonlinearitySpec, build_leading
from refprofile.spectral import Grid, build_operator, gaussian_wells

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def default_gamma(default_op, default_lead):
    return gammas_for(default_op, default_lead)[0]


def test_ladder_defaults():
    assert default_eps_ladder(0.5) == pytest.approx([0.1, 0.05, 0.025, 0.0125])
    assert default_eps_ladder(3.0)[0] == pytest.approx(0.2)
    assert min(default_eps_ladder(0.5, 0.1, boundary="dirichlet")) >= 50 * 0.01 / 8


def test_default_gamma_golden(default_gamma):
    gold = json.loads((GOLDEN / "default_fgr.json").read_text())
    assert default_gamma.m == (-1, 2)
    assert default_gamma.lam == pytest.approx(gold["lambda"], rel=1e-9)
    assert default_gamma.gamma == pytest.approx(gold["gamma"], rel=1e-6)
    assert default_gamma.gamma > 0
    assert all(s > 0 for s in default_gamma.samples)
    assert default_gamma.stability <= 0.1


def test_gamma_matches_spectral_density_histogram(default_op, default_lead, default_gamma):
    est = histogram_gamma(default_op, default_lead.G[(-1, 2)], default_gamma.lam)
    assert est == pytest.approx(default_gamma.gamma, rel=0.2)


def test_discrete_mode_has_no_rate(default_op):
    c = compute_gamma(default_op, default_op.mode(0), 0.3)
    assert abs(c.gamma) < 1e-12 and max(abs(s) for s in c.samples) < 1e-12


def test_quadratic_scaling(default_op, default_lead, default_gamma):
    G = default_lead.G[(-1, 2)]
    for c in (0.1, 3.0, -7.0):
        g2 = compute_gamma(default_op, c * G, default_gamma.lam).gamma
        assert g2 == pytest.approx(c * c * default_gamma.gamma, rel=1e-10)


def test_form_is_symmetric(default_op, rng):
    op = default_op
    u = np.exp(-(op.x - 1) ** 2) * rng.standard_normal(op.grid.n_points)
    v = np.exp(-(op.x + 0.5) ** 2 / 2)
    assert fgr_form(op, u, v, 0.2, 0.01) == pytest.approx(fgr_form(op, v, u, 0.2, 0.01), rel=1e-10)


def test_preconditions(default_op, default_lead):
    G = default_lead.G[(-1, 2)]
    with pytest.raises(ValueError):
        compute_gamma(default_op, G, -0.1)
    with pytest.raises(ValueError):
        compute_gamma(default_op, G, 0.2, [0.01, 0.02])
    with pytest.raises(ValueError):
        compute_gamma(default_op, G + 1j * G, 0.2)


def test_unresolved_ladder_raises():
    # a closed box with eps far below the level spacing is not a limiting-absorption regime
    op = build_operator(Grid.symmetric(15, 0.1), gaussian_wells([-1.5, 1.5], [2.0, 1.2], [1.0, 1.0]),
                        boundary_tol=1e-3)
    G = op.mode(0) * op.mode(1) ** 2
    lam = 2 * op.omegas[1] - op.omegas[0]
    with pytest.raises(UnresolvedResonanceError):
        compute_gamma(op, G, lam, [4e-3, 2e-3, 1e-3, 5e-4], boundary="dirichlet")


def _coef(m, gamma):
    return FgrCoefficient(m, 0.2, gamma, [0.02, 0.01], [gamma, gamma])


def test_check_fgr_assumption(default_gamma):
    assert check_fgr_assumption([default_gamma]).ok
    rep = check_fgr_assumption([_coef((-1, 2), 0.0)])
    assert not rep.ok and rep.failing == [(-1, 2)]
    rep = check_fgr_assumption([_coef((-1, 2), 1e-3), _coef((-2, 3), 1e-12)])
    assert not rep.ok and rep.failing == [(-2, 3)]
    assert check_fgr_assumption([_coef((-1, 2), 5e-8)], tau=1e-8).marginal == [(-1, 2)]


def test_linear_g_fails_the_check(default_op, default_tables):
    lead = build_leading(default_op, NonlinearitySpec((0.0,)), default_tables)
    assert not check_fgr_assumption(gammas_for(default_op, lead)).ok


def test_genericity_cubic(default_op, cubic, default_lead, default_gamma):
    e = genericity_quadratic(default_op, cubic, default_lead, (-1, 2))
    assert (e.L, e.N) == (1, 1)
    assert e.b == 0 and e.c == 0 and e.roots == [0.0]
    assert e.a > 0
    assert e.gamma_at_actual == pytest.approx(default_gamma.gamma, rel=1e-10)


def test_genericity_fifth_order():
    op = build_operator(Grid.symmetric(60, 0.1), gaussian_wells([-1.5, 1.5], [1.5, 1.5], [1.0, 1.0]))
    tables = enumerate_tables(op.omegas)
    nl = NonlinearitySpec((1.0, 0.7))
    lead = build_leading(op, nl, tables)
    m = (-2, 3)
    e = genericity_quadratic(op, nl, lead, m)
    assert (e.L, e.N) == (2, 1)
    direct = compute_gamma(op, lead.G[m], float(np.dot(m, op.omegas))).gamma
    assert e.gamma_at_actual == pytest.approx(direct, rel=1e-8)
    # Gamma >= 0 for every x, so the discriminant cannot be positive
    assert e.b**2 - 4 * e.a * e.c <= 1e-12 * e.b**2
    with pytest.raises(ValueError):
        genericity_quadratic(op, nl, lead, basis(0, 2))
