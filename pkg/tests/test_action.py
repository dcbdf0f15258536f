import itertools

import numpy as np
import pytest

from conftest import smooth_random_field
from graphnls.action import (ActionLandscape, action, cubic_edge_integral, cubic_tensor, diagonal_entry,
                             fit_order, landscape_grid, m0, m0_closed_form, saddle_witness, structure_constants)
from graphnls.errors import DomainError
from graphnls.grid import h1_norm
from graphnls.spectral import neutral_basis, project_out, quadratic_form
from graphnls.stationary import half_soliton


@pytest.fixture(scope="module")
def landscape3():
    return ActionLandscape(1.0, landscape_grid(3))


@pytest.fixture(scope="module")
def tensor3():
    return cubic_tensor(1.0, 3)


def test_closed_form_constants():
    assert cubic_edge_integral(1.0) == pytest.approx(-1 / 12)
    assert diagonal_entry(1.0, 2) == pytest.approx(0.5)
    assert diagonal_entry(1.3, 1) == 0.0
    s = structure_constants(3)
    assert s[0, 0, 1] == 2.0 and s[1, 1, 1] == -6.0


def test_tensor_examples(tensor3):
    t = tensor3.entries
    assert t[1, 1, 1] == pytest.approx(0.5, abs=1e-8)
    assert abs(t[0, 0, 0]) < 1e-12
    assert t[0, 0, 1] == pytest.approx(-1 / 6, abs=1e-8)


def test_tensor_fully_symmetric(tensor3):
    t = tensor3.entries
    for perm in itertools.permutations(range(3)):
        assert np.max(np.abs(t - t.transpose(perm))) <= 1e-12 * np.max(np.abs(t))


@pytest.mark.parametrize("p,n", [(0.5, 3), (1.5, 4), (1.9, 5)])
def test_tensor_matches_separable_form(p, n):
    t = cubic_tensor(p, n).entries
    expected = structure_constants(n) * cubic_edge_integral(p)
    assert np.max(np.abs(t - expected)) < 1e-8
    for j in range(1, n):
        assert t[j - 1, j - 1, j - 1] == pytest.approx(diagonal_entry(p, j), abs=1e-8)


def test_tensor_domain():
    with pytest.raises(DomainError):
        cubic_tensor(0.4, 3)


def test_tensor_csv(tensor3):
    lines = tensor3.to_csv().splitlines()
    assert lines[0] == "i,j,k,value"
    assert len(lines) == 1 + 8


def test_m0_examples(tensor3):
    assert abs(m0([1.0, 1.0], tensor3)) < 1e-12
    assert m0([0.0, 1.0], tensor3) == pytest.approx(-2.0, abs=1e-7)
    t4 = cubic_tensor(1.0, 4)
    assert m0([0.0, 0.0, 1.0], t4) == pytest.approx(-8.0, abs=1e-7)


@pytest.mark.parametrize("n,p", [(3, 1.0), (4, 1.0), (3, 0.75), (4, 1.5)])
def test_m0_matches_closed_forms(n, p):
    t = cubic_tensor(p, n)
    rng = np.random.default_rng(n * 10 + int(p * 4))
    for _ in range(100):
        c = rng.uniform(-1, 1, n - 1)
        assert abs(m0(c, t) - m0_closed_form(c, p)) < 1e-10
        assert m0(-c, t) == -m0(c, t)


def test_m0_length_checked(tensor3):
    with pytest.raises(DomainError):
        m0([1.0, 2.0, 3.0], tensor3)


def test_action_at_soliton_is_energy_plus_mass():
    g = landscape_grid(3)
    psi = half_soliton(1.0, 1.0, g).field
    # E = -1, Q = 3 up to O(h^2) from the Dirichlet form
    assert action(psi, 1.0) == pytest.approx(2.0, abs=1e-3)


def test_minimizer_at_zero(landscape3):
    res = landscape3.transverse_minimizer(np.zeros(2))
    assert h1_norm(res.u_perp) < 1e-12
    assert abs(res.value) < 1e-12


def test_minimizer_is_quadratically_small(landscape3):
    ts = [0.02, 0.04, 0.08]
    norms = [h1_norm(landscape3.transverse_minimizer([0.0, t]).u_perp) for t in ts]
    assert fit_order(ts, norms) >= 1.8


def test_minimizer_constraints(landscape3):
    res = landscape3.transverse_minimizer([0.03, -0.05])
    u = res.u_perp
    from graphnls.grid import l2_inner
    b = neutral_basis(1.0, 3, 1.0, landscape3.grid)
    assert abs(l2_inner(u, landscape3.phi)) < 1e-10
    for mode in b.modes:
        assert abs(l2_inner(u, mode)) < 1e-10


def test_reduced_energy_cubic_leading_term(landscape3):
    t = 0.02
    m = landscape3.transverse_minimizer([0.0, t]).value
    assert m / t**3 == pytest.approx(-2.0, rel=0.1)


def test_minimizer_rejects_large_c(landscape3):
    with pytest.raises(DomainError):
        landscape3.transverse_minimizer([0.0, 0.2])


def test_saddle_witness_n3(landscape3):
    c_plus, c_minus = saddle_witness(1.0, 3, landscape=landscape3)
    assert np.allclose(c_plus, [0.0, -0.02]) and np.allclose(c_minus, [0.0, 0.02])


def test_saddle_witness_n4():
    land = ActionLandscape(1.0, landscape_grid(4))
    c_plus, c_minus = saddle_witness(1.0, 4, landscape=land)
    assert c_plus[-1] < 0 < c_minus[-1]


def test_degenerate_direction_is_subcubic(landscape3):
    ts = np.array([0.02, 0.04, 0.08])
    ms = [landscape3.transverse_minimizer([t, 0.0]).value for t in ts]
    assert fit_order(ts, ms) > 3.5


def test_saddle_domain():
    with pytest.raises(DomainError):
        saddle_witness(2.0, 3)


def test_second_variation_on_constrained_space(landscape3):
    g = landscape3.grid
    phi = half_soliton(1.0, 1.0, g).field
    b = neutral_basis(1.0, 3, 1.0, g)
    for u in b.modes:
        assert abs(quadratic_form("plus", u, 1.0).value) <= 1e-8
    rng = np.random.default_rng(5)
    for _ in range(50):
        v = project_out(smooth_random_field(g, rng), [phi])
        assert quadratic_form("plus", v, 1.0).value >= 0


def test_reduced_energy_below_cubic_power():
    # remainder is only o(t^3) for p < 1, hence the looser tolerance
    land = ActionLandscape(0.75, landscape_grid(3))
    t = 0.02
    m = land.transverse_minimizer([0.0, t]).value
    assert m / t**3 == pytest.approx(-2 * 0.75**2, rel=0.25)
