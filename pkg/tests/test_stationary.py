import math

import numpy as np
import pytest
from scipy.integrate import quad

from graphnls.errors import DomainError
from graphnls.grid import GraphField, StarGraphGrid
from graphnls.stationary import (DiscreteFamily, ClosedFormFamily, half_line_phi_mass, half_soliton, mass,
                                 mass_derivative, mass_energy, phi, stationary_residual)


def test_vertex_value_and_sech(grid3):
    s = half_soliton(1.0, 1.0, grid3)
    assert s.field.vertex == pytest.approx(1.0, abs=1e-15)
    assert float(phi(1.0, 1.0)) == pytest.approx(2 / (math.e + 1 / math.e), abs=1e-12)
    assert float(phi(1.0, 1.0)) == pytest.approx(0.6480542737, abs=1e-10)


def test_omega_four_profile(grid3):
    s = half_soliton(1.0, 4.0, grid3)
    assert s.field.vertex == pytest.approx(2.0, abs=1e-14)
    e = s.field.edges()[1]
    assert np.max(np.abs(e[:-1] - 2 / np.cosh(2 * grid3.x[:-1]))) < 1e-14


@pytest.mark.parametrize("p,omega", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
def test_domain_errors(grid3, p, omega):
    with pytest.raises(DomainError):
        half_soliton(p, omega, grid3)


@pytest.mark.parametrize("omega", [1.0, 2.0])
def test_residual_order_two(omega):
    res = [stationary_residual(half_soliton(1.0, omega, StarGraphGrid.with_spacing(3, h)))
           for h in (0.05, 0.025)]
    if omega == 1.0:
        # leading stencil error h^2 phi(0) / 12 with phi(0) = 5
        assert res[0] == pytest.approx(5 * 0.05**2 / 12, rel=0.02)
    assert 3.7 <= res[0] / res[1] <= 4.3


def test_residual_of_zero_field(grid3):
    from graphnls.stationary import StationaryState
    assert stationary_residual(StationaryState(1.0, 1.0, GraphField.zeros(grid3))) == 0.0


def test_mass_and_energy():
    g = StarGraphGrid.with_spacing(3, 0.00625)
    q, e = mass_energy(half_soliton(1.0, 1.0, g))
    assert abs(q - 3.0) < 1e-6
    # N (1/3 - 2/3); the gradient term carries an O(h^2) error
    assert abs(e + 1.0) < 1e-5
    assert mass(GraphField.zeros(g)) == 0.0


def test_energy_converges_at_order_two():
    errs = []
    for h in (0.05, 0.025, 0.0125):
        q, e = mass_energy(half_soliton(1.0, 1.0, StarGraphGrid.with_spacing(3, h)))
        errs.append(abs(e + 1.0))
    assert 3.7 < errs[0] / errs[1] < 4.3


def test_half_line_mass_oracles():
    assert half_line_phi_mass(1.0) == pytest.approx(1.0, abs=1e-12)
    ref, _ = quad(lambda x: np.cosh(0.5 * x) ** -4.0, 0, 200)
    assert half_line_phi_mass(0.5) == pytest.approx(ref, rel=1e-12)


def test_mass_derivative_values():
    assert mass_derivative(1.0, 1.0, 3) == pytest.approx(1.5, abs=1e-6)
    assert mass_derivative(2.0, 1.0, 3) == 0.0
    with pytest.raises(DomainError):
        mass_derivative(0.0, 1.0, 3)


@pytest.mark.parametrize("p", [0.5, 1.0, 1.5, 1.9])
def test_mass_derivative_positive_and_matches_fd(p):
    d = mass_derivative(p, 1.0, 3)
    assert d > 0
    g = StarGraphGrid(3, 60.0, 24000)
    step = 1e-4
    fd = (mass(half_soliton(p, 1 + step, g).field) - mass(half_soliton(p, 1 - step, g).field)) / (2 * step)
    assert abs(fd - d) < 1e-6


def test_mass_scaling_law(grid3):
    p = 1.5
    q1 = mass(half_soliton(p, 1.0, StarGraphGrid(3, 40.0, 8000)).field)
    q2 = mass(half_soliton(p, 1.7, StarGraphGrid(3, 40.0, 8000)).field)
    assert q2 == pytest.approx(1.7 ** (1 / p - 0.5) * q1, rel=1e-6)


def test_closed_form_family_derivative(grid3):
    fam = ClosedFormFamily(1.0, grid3)
    h = 1e-5
    fd = (fam.profile(1 + h).data - fam.profile(1 - h).data) / (2 * h)
    assert np.max(np.abs(fd - fam.d_omega(1.0).data)) < 1e-8
    fd2 = (fam.d_omega(1 + h).data - fam.d_omega(1 - h).data) / (2 * h)
    assert np.max(np.abs(fd2 - fam.d2_omega(1.0).data)) < 1e-6


def test_discrete_family_is_exact_and_close(grid3):
    fam = DiscreteFamily(1.0, grid3)
    from graphnls.grid import apply_hamiltonian
    for omega in (0.8, 1.0, 1.3):
        f = fam.profile(omega).data
        r = apply_hamiltonian(fam.profile(omega)).data + omega * f - 2 * f**3
        assert np.max(np.abs(r)) < 1e-11
        closed = half_soliton(1.0, omega, grid3).field.data
        assert np.max(np.abs(f - closed)) < 5e-3
    h = 1e-5
    fd = (fam.profile(1 + h).data - fam.profile(1 - h).data) / (2 * h)
    assert np.max(np.abs(fd - fam.d_omega(1.0).data)) < 1e-7
