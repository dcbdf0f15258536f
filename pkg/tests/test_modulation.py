import math

import numpy as np
import pytest

from graphnls.errors import DecompositionError, DomainError
from graphnls.evolution import EvolutionConfig, run
from graphnls.grid import GraphField, h1_norm, l2_inner
from graphnls.modulation import (ModulationSeries, decompose_primary, decompose_secondary, energy_budget,
                                 full_frame, parameter_rate_check, project_initial_perturbation, track)
from graphnls.spectral import neutral_basis
from graphnls.stationary import DiscreteFamily


@pytest.fixture(scope="module")
def family(grid3):
    return DiscreteFamily(1.0, grid3)


@pytest.fixture(scope="module")
def basis(grid3):
    return neutral_basis(1.0, 3, 1.0, grid3)


def bump(grid, edge=0, x0=4.0, k=0.7):
    e = np.zeros((grid.num_edges, grid.points_per_edge + 1), dtype=complex)
    e[edge] = np.exp(-((grid.x - x0) ** 2) + 1j * k * grid.x)
    e[:, 0] = 0.0
    return GraphField.from_edges(grid, e)


def test_exact_modulated_state(family):
    psi = np.exp(0.1j) * family.profile(1.05)
    fr = decompose_primary(psi, (0.0, 1.0), family)
    assert fr.theta == pytest.approx(0.1, abs=1e-10)
    assert fr.omega == pytest.approx(1.05, abs=1e-10)
    assert np.max(np.abs(fr.u.data)) < 1e-10 and np.max(np.abs(fr.w.data)) < 1e-10


def test_kernel_perturbation_kept_in_u(family, basis):
    s = 0.01
    psi = family.profile(1.0) + s * basis.modes[0]
    fr = decompose_primary(psi, (0.0, 1.0), family)
    assert abs(fr.theta) < 1e-10 and abs(fr.omega - 1) < 1e-10
    assert np.max(np.abs(fr.u.data - s * basis.modes[0].data)) < 1e-10
    assert np.max(np.abs(fr.w.data)) < 1e-10


def test_random_round_trip_and_constraints(family):
    rng = np.random.default_rng(4)
    for _ in range(5):
        pert = bump(family.grid, rng.integers(3), rng.uniform(2, 6), rng.uniform(-1, 1))
        psi = np.exp(1j * rng.uniform(-1, 1)) * (family.profile(1.0) + 0.03 * rng.normal() * pert)
        fr = decompose_primary(psi, (0.0, 1.0), family, check_distance=False)
        assert fr.res_primary <= 1e-10
        assert abs(l2_inner(fr.u, family.profile(fr.omega))) <= 1e-10
        assert abs(l2_inner(fr.w, family.d_omega(fr.omega))) <= 1e-10
        assert np.max(np.abs(fr.reassemble(family).data - psi.data)) <= 1e-12


def test_gauge_equivariance(family):
    psi = family.profile(1.0) + 0.02 * bump(family.grid)
    a = decompose_primary(psi, (0.0, 1.0), family)
    b = decompose_primary(np.exp(0.9j) * psi, (0.9, 1.0), family)
    assert b.theta - a.theta == pytest.approx(0.9, abs=1e-10)
    assert b.omega == pytest.approx(a.omega, abs=1e-10)
    assert np.max(np.abs(a.u.data - b.u.data)) < 1e-10
    assert np.max(np.abs(a.w.data - b.w.data)) < 1e-10


def test_far_field_rejected(family):
    with pytest.raises(DecompositionError):
        decompose_primary(family.profile(1.0) + 2.0 * bump(family.grid), (0.0, 1.0), family)


def test_secondary_basis_members(basis, grid3):
    zero = GraphField.zeros(grid3)
    c, b, up, wp, res = decompose_secondary(0.03 * basis.modes[1], zero, 1.0, basis)
    assert np.allclose(c, [0.0, 0.03], atol=1e-12) and np.allclose(b, 0.0, atol=1e-12)
    assert np.max(np.abs(up.data)) < 1e-12 and res <= 1e-10
    c, b, up, wp, res = decompose_secondary(zero, 0.02 * basis.generalized[0], 1.0, basis)
    assert np.allclose(b, [0.02, 0.0], atol=1e-12) and np.allclose(c, 0.0, atol=1e-12)
    assert np.max(np.abs(wp.data)) < 1e-12


def test_secondary_phi_contamination(basis, family, grid3):
    phi = family.profile(1.0)
    c, b, up, wp, res = decompose_secondary(0.01 * phi, GraphField.zeros(grid3), 1.0, basis)
    assert np.max(np.abs(c)) < 1e-12
    assert np.max(np.abs(up.data - 0.01 * phi.data)) < 1e-12


def test_secondary_omega_mismatch(basis, grid3):
    z = GraphField.zeros(grid3)
    with pytest.raises(DomainError):
        decompose_secondary(z, z, 1.1, basis)


def test_full_frame_residuals(family):
    psi = family.profile(1.0) + 0.02 * bump(family.grid, 1)
    fr = full_frame(psi, (0.0, 1.0), family, 1.0)
    assert fr.res_primary <= 1e-10 and fr.res_secondary <= 1e-10


@pytest.fixture(scope="module")
def stationary_series(family):
    phi = family.profile(1.0)
    traj = run(phi, EvolutionConfig(dt=0.0025, t_end=2.0, stride=20), reference=phi)
    return traj, track(traj, family)


def test_stationary_track(stationary_series):
    traj, s = stationary_series
    assert s.exit_time is None and len(s) == len(traj)
    assert np.max(np.abs(np.asarray(s.c))) < 1e-8
    assert np.max(np.abs(np.asarray(s.b))) < 1e-8
    assert np.max(np.abs(s.array("omega") - 1)) < 1e-8
    assert max(s.norm_uperp) < 1e-8 and max(s.norm_wperp) < 1e-8


def test_stationary_rates(stationary_series):
    _, s = stationary_series
    rep = parameter_rate_check(s)
    # midpoint CN carries a phase error omega^3 dt^2 / 12 = 5.2e-7 at dt = 0.0025
    assert rep.sup_theta_dot_minus_omega <= 1e-6
    assert rep.sup_omega_dot <= 1e-8


def test_stationary_budget(stationary_series, family):
    traj, s = stationary_series
    rep = energy_budget(traj, s, family)
    assert np.max(np.abs(s.array("delta_lhs"))) <= 1e-8
    assert rep.mismatch <= 1e-8


def test_rate_check_needs_samples():
    with pytest.raises(DomainError):
        parameter_rate_check(ModulationSeries(1.0, 3, t=[0.0, 1.0]))


def _perturbed_series(family, size):
    pert = bump(family.grid, 0, 3.0, 0.4)
    u0, w0 = project_initial_perturbation(pert.real, pert.imag, family)
    norm = math.hypot(h1_norm(u0), h1_norm(w0))
    psi0 = family.profile(1.0) + (size / norm) * (u0 + 1j * w0)
    traj = run(psi0, EvolutionConfig(dt=0.005, t_end=3.0, stride=4))
    return track(traj, family)


def test_rates_scale_quadratically(family):
    big, small = (parameter_rate_check(_perturbed_series(family, s)) for s in (0.04, 0.02))
    assert big.sup_theta_dot_minus_omega / small.sup_theta_dot_minus_omega == pytest.approx(4.0, rel=0.25)
    assert big.sup_omega_dot / small.sup_omega_dot == pytest.approx(4.0, rel=0.25)
    # the normalised rates stay bounded across the 2x range
    assert big.ratio_theta == pytest.approx(small.ratio_theta, rel=0.25)
    assert big.ratio_omega == pytest.approx(small.ratio_omega, rel=0.25)


def test_projected_initial_constraints(family):
    u0, w0 = project_initial_perturbation(bump(family.grid).real, bump(family.grid).imag, family)
    assert abs(l2_inner(u0, family.profile(1.0))) < 1e-14
    assert abs(l2_inner(w0, family.d_omega(1.0))) < 1e-14


def test_series_csv_header(stationary_series):
    _, s = stationary_series
    head = s.to_csv().splitlines()[0]
    assert head == ("t,theta,omega,c_1,c_2,b_1,b_2,norm_Uperp,norm_Wperp,res_primary,res_secondary,"
                    "Delta_lhs,Delta_rhs")
