import numpy as np
import pytest

from graphnls.errors import DomainError, GridMismatchError
from graphnls.grid import (GraphField, StarGraphGrid, apply_hamiltonian, dirichlet_form, distance_to_orbit,
                           flux_sum, gregory_edge_weights, h1_inner, h1_norm, l2_inner, laplacian_matrix)
from graphnls.stationary import half_soliton, profile


def soliton(grid, p=1.0, omega=1.0):
    return half_soliton(p, omega, grid).field


def test_grid_rejects_two_edges():
    with pytest.raises(DomainError):
        StarGraphGrid(2, 30.0, 600)


def test_field_shape_checked(grid3):
    with pytest.raises(GridMismatchError):
        GraphField(grid3, np.zeros(grid3.size + 1))


def test_from_edges_enforces_continuity(grid3):
    e = np.zeros((3, grid3.points_per_edge + 1))
    e[0, 0] = 1.0
    with pytest.raises(DomainError):
        GraphField.from_edges(grid3, e)


def test_edges_roundtrip(grid3):
    f = soliton(grid3)
    g = GraphField.from_edges(grid3, f.edges())
    assert np.array_equal(f.data, g.data)


def test_l2_zero(grid3):
    z = GraphField.zeros(grid3)
    assert l2_inner(z, z) == 0


def test_l2_of_soliton(grid3):
    f = soliton(grid3)
    # sum over edges of int sech^2 = N
    assert abs(l2_inner(f, f) - 3.0) < 1e-6


def test_l2_orthogonal_vectors(grid3):
    from graphnls.stationary import dphi, phi
    f = GraphField.from_profile(grid3, lambda x: dphi(x, 1.0), [1.0, -1.0, 0.0])
    g = GraphField.from_profile(grid3, lambda x: phi(x, 1.0))
    assert abs(l2_inner(f, g)) < 1e-12


def test_l2_is_conjugate_linear_in_first_slot(grid3):
    f = soliton(grid3)
    assert np.isclose(l2_inner(1j * f, f), -1j * l2_inner(f, f))


def test_l2_grid_mismatch(grid3):
    other = StarGraphGrid.with_spacing(4, 0.05)
    with pytest.raises(GridMismatchError):
        l2_inner(soliton(grid3), soliton(other))


def test_h1_zero(grid3):
    z = GraphField.zeros(grid3)
    assert h1_inner(z, z) == 0


def test_h1_soliton_converges_at_order_two():
    # N (int sech^2 + int sech^2 tanh^2) = 3 (1 + 1/3)
    errs = []
    for h in (0.1, 0.05, 0.025):
        f = soliton(StarGraphGrid.with_spacing(3, h))
        errs.append(abs(h1_norm(f) ** 2 - 4.0))
    assert errs[1] < 2e-3
    assert 3.6 < errs[0] / errs[1] < 4.4
    assert 3.6 < errs[1] / errs[2] < 4.4


def test_hamiltonian_zero(grid3):
    z = GraphField.zeros(grid3)
    assert not np.any(apply_hamiltonian(z).data)


def test_laplacian_symmetric_under_weights(grid3):
    a = laplacian_matrix(grid3)
    wa = np.diag(grid3.weights) @ a.toarray()
    assert np.allclose(wa, wa.T, atol=1e-9)


def test_dirichlet_form_matches_operator(grid3):
    f = soliton(grid3)
    assert abs(dirichlet_form(f) - np.real(l2_inner(apply_hamiltonian(f), f))) < 1e-10


def test_stationary_residual_order_two():
    res = []
    for h in (0.1, 0.05, 0.025):
        f = soliton(StarGraphGrid.with_spacing(3, h))
        r = apply_hamiltonian(f).data + f.data - 2 * f.data**3
        res.append(np.max(np.abs(r)))
    assert 3.6 < res[0] / res[1] < 4.4
    assert 3.6 < res[1] / res[2] < 4.4


def test_flux_sum_diagnostic(grid3):
    # x (L - x) has slope L at the vertex on each edge
    f = GraphField.from_profile(grid3, lambda x: x * (grid3.edge_length - x))
    assert abs(flux_sum(f) - 3 * grid3.edge_length) < 1e-9
    assert abs(flux_sum(soliton(grid3))) < 1e-2


def test_distance_on_orbit(grid3):
    phi = soliton(grid3)
    assert distance_to_orbit(np.exp(0.7j) * phi, phi) < 1e-12
    assert distance_to_orbit(1j * phi, phi) < 1e-12


def test_distance_radial_perturbation(grid3):
    phi = soliton(grid3)
    assert abs(distance_to_orbit(1.01 * phi, phi) - 0.01 * h1_norm(phi)) < 1e-12


def test_distance_zero_reference(grid3):
    with pytest.raises(DomainError):
        distance_to_orbit(soliton(grid3), GraphField.zeros(grid3))


def test_distance_is_phase_invariant(grid3):
    phi = soliton(grid3)
    psi = phi + 0.05 * GraphField.from_profile(grid3, lambda x: np.exp(-x) * x, [1, -1, 0])
    assert abs(distance_to_orbit(np.exp(2.1j) * psi, phi) - distance_to_orbit(psi, phi)) < 1e-12


def test_gregory_weights_integrate_polynomials(grid3):
    w = gregory_edge_weights(grid3)
    x = grid3.x
    # x e^{-x} is odd-ish at the vertex, so trapezoid is only second order there
    f = x * np.exp(-x)
    assert abs(np.sum(w * f) - 1.0) < 1e-10
    assert abs(np.sum(grid3.edge_weights * f) - 1.0) > 1e-4
    assert not w.flags.writeable


def test_profile_scaling_consistency(grid3):
    edges = half_soliton(1.5, 2.0, grid3).field.edges()[0]
    ref = 2.0 ** (1 / 3.0) * profile(np.sqrt(2.0) * grid3.x, 1.5, 1.0)
    assert np.max(np.abs(edges - ref)) < 1e-12
