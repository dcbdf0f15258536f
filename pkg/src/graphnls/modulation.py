"""Modulation frame along NLS trajectories.

Primary level: Psi = e^{i theta} [Phi_omega + U + i W] with
<U, Phi_omega> = 0 and <W, d_omega Phi_omega> = 0.
Secondary level: U = sum c_j U_j + U_perp, W = sum b_j W_j + W_perp with
<U_perp, W_j> = <W_perp, U_j> = 0.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .action import CubicTensor, cubic_tensor, m0
from .errors import DecompositionError, DomainError, InconsistencyError
from .evolution import Trajectory
from .grid import GraphField, distance_to_orbit, h1_norm, l2_inner
from .spectral import NeutralModeBasis, neutral_basis
from .stationary import DiscreteFamily, energy, mass

PRIMARY_TOL = 1e-10
SECONDARY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ModulationFrame:
    theta: float
    omega: float
    u: GraphField
    w: GraphField
    c: np.ndarray | None = None
    b: np.ndarray | None = None
    u_perp: GraphField | None = None
    w_perp: GraphField | None = None
    res_primary: float = 0.0
    res_secondary: float = math.nan

    def reassemble(self, family) -> GraphField:
        base = family.profile(self.omega) + self.u + 1j * self.w
        return base * np.exp(1j * self.theta)


def _primary_residual(rot: GraphField, phi, dphi) -> tuple[float, float]:
    g1 = l2_inner(rot.real - phi, phi)
    g2 = l2_inner(rot.imag, dphi)
    return g1, g2


def decompose_primary(psi: GraphField, guess=(0.0, 1.0), family=None, p: float = 1.0,
                      reference: GraphField | None = None, max_iter: int = 30,
                      check_distance: bool = True) -> ModulationFrame:
    """Newton iteration on G(theta, omega) = (<U, Phi_w>, <W, d_w Phi_w>)."""
    family = family or DiscreteFamily(p, psi.grid)
    if check_distance:
        ref = reference if reference is not None else family.profile(1.0)
        d = distance_to_orbit(psi, ref)
        if d > 0.3:
            raise DecompositionError(f"field lies {d:.3g} from the orbit, outside the tubular neighbourhood")
    theta, omega = float(guess[0]), float(guess[1])
    for _ in range(max_iter):
        if not omega > 0:
            raise DecompositionError("Newton iterate left omega > 0")
        phi, dphi, d2phi = family.profile(omega), family.d_omega(omega), family.d2_omega(omega)
        rot = psi * np.exp(-1j * theta)
        re, im = rot.real, rot.imag
        g = np.array(_primary_residual(rot, phi, dphi))
        jac = np.array([
            [l2_inner(im, phi), -l2_inner(dphi, phi) + l2_inner(re - phi, dphi)],
            [-l2_inner(re, dphi), l2_inner(im, d2phi)],
        ])
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError as exc:
            raise DecompositionError("singular modulation Jacobian") from exc
        theta += step[0]
        omega += step[1]
        if np.max(np.abs(step)) < 1e-14:
            break
    else:
        raise DecompositionError(f"modulation Newton did not converge in {max_iter} iterations")
    phi, dphi = family.profile(omega), family.d_omega(omega)
    rot = psi * np.exp(-1j * theta)
    res = float(np.max(np.abs(_primary_residual(rot, phi, dphi))))
    if res > PRIMARY_TOL:
        raise DecompositionError(f"primary constraints violated after Newton ({res:.3e})")
    return ModulationFrame(theta, omega, rot.real - phi, rot.imag, res_primary=res)


def decompose_secondary(u: GraphField, w: GraphField, omega: float, basis: NeutralModeBasis):
    """Project U onto the U_j along the dual W_j, and W onto the W_j along the U_j."""
    if abs(basis.omega - omega) > 1e-12:
        raise DomainError(f"basis built at omega={basis.omega}, frame has omega={omega}")
    m = np.asarray(basis.pairings, dtype=float)
    if np.any(m <= 0):
        raise InconsistencyError("non-positive pairing <U_j, W_j>")
    c = np.array([l2_inner(u, wj) for wj in basis.generalized]) / m
    b = np.array([l2_inner(w, uj) for uj in basis.modes]) / m
    u_perp = u.copy()
    w_perp = w.copy()
    for j in range(basis.dim):
        u_perp = u_perp - c[j] * basis.modes[j]
        w_perp = w_perp - b[j] * basis.generalized[j]
    res = max(max(abs(l2_inner(u_perp, wj)) for wj in basis.generalized),
              max(abs(l2_inner(w_perp, uj)) for uj in basis.modes))
    return c, b, u_perp, w_perp, float(res)


def full_frame(psi: GraphField, guess, family, p: float,
               reference: GraphField | None = None) -> ModulationFrame:
    fr = decompose_primary(psi, guess, family, p, reference)
    grid = psi.grid
    basis = neutral_basis(p, grid.num_edges, fr.omega, grid)
    c, b, up, wp, res2 = decompose_secondary(fr.u, fr.w, fr.omega, basis)
    return ModulationFrame(fr.theta, fr.omega, fr.u, fr.w, c, b, up, wp, fr.res_primary, res2)


@dataclass(eq=False)
class ModulationSeries:
    p: float
    num_edges: int
    t: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    omega: list = field(default_factory=list)
    c: list = field(default_factory=list)
    b: list = field(default_factory=list)
    norm_u: list = field(default_factory=list)
    norm_w: list = field(default_factory=list)
    norm_uperp: list = field(default_factory=list)
    norm_wperp: list = field(default_factory=list)
    res_primary: list = field(default_factory=list)
    res_secondary: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    delta_lhs: list = field(default_factory=list)
    delta_rhs: list = field(default_factory=list)
    exit_time: float | None = None
    exit_reason: str = ""

    def __len__(self) -> int:
        return len(self.t)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def to_csv(self) -> str:
        k = self.num_edges - 1
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "theta", "omega"] + [f"c_{j}" for j in range(1, k + 1)]
                    + [f"b_{j}" for j in range(1, k + 1)]
                    + ["norm_Uperp", "norm_Wperp", "res_primary", "res_secondary", "Delta_lhs", "Delta_rhs"])
        for i in range(len(self.t)):
            dl = self.delta_lhs[i] if i < len(self.delta_lhs) else math.nan
            dr = self.delta_rhs[i] if i < len(self.delta_rhs) else math.nan
            row = [self.t[i], self.theta[i], self.omega[i], *self.c[i], *self.b[i], self.norm_uperp[i],
                   self.norm_wperp[i], self.res_primary[i], self.res_secondary[i], dl, dr]
            wr.writerow([f"{v:.15g}" for v in row])
        return buf.getvalue()


def track(traj: Trajectory, family=None, guess=(0.0, 1.0), reference: GraphField | None = None) -> ModulationSeries:
    """Decompose every recorded snapshot, warm-starting from the previous frame.

    Stops at the first failed decomposition and records its time as the exit
    time; that failure is the signal of leaving the tube around the orbit.
    """
    p, grid = traj.p, traj.grid
    family = family or DiscreteFamily(p, grid)
    reference = reference if reference is not None else family.profile(1.0)
    out = ModulationSeries(p, grid.num_edges)
    theta, omega = guess
    t_prev = None
    for t, psi in zip(traj.times, traj.snapshots):
        if t_prev is not None:
            theta += omega * (t - t_prev)
        try:
            fr = full_frame(psi, (theta, omega), family, p, reference=reference)
        except (DecompositionError, InconsistencyError) as exc:
            out.exit_time = t
            out.exit_reason = str(exc)
            break
        theta, omega, t_prev = fr.theta, fr.omega, t
        out.t.append(t)
        out.theta.append(fr.theta)
        out.omega.append(fr.omega)
        out.c.append(fr.c)
        out.b.append(fr.b)
        out.norm_u.append(h1_norm(fr.u))
        out.norm_w.append(h1_norm(fr.w))
        out.norm_uperp.append(h1_norm(fr.u_perp))
        out.norm_wperp.append(h1_norm(fr.w_perp))
        out.res_primary.append(fr.res_primary)
        out.res_secondary.append(fr.res_secondary)
        framed = family.profile(fr.omega) + fr.u + 1j * fr.w
        out.energy.append(energy(framed, p))
        out.mass.append(mass(framed))
    return out


@dataclass(frozen=True)
class BudgetReport:
    delta0: float
    mismatch: float
    remainder_ratio: np.ndarray
    max_ratio: float


def energy_budget(traj: Trajectory, series: ModulationSeries, family=None,
                  tensor: CubicTensor | None = None, masses=None) -> BudgetReport:
    """Compare Delta(t) from the frame with its expression through the initial data.

    Also reports the ratio of |omega - 1|^2 + ||U_perp + i W_perp||^2_{H1}
    to delta^2 + |H0(c, b)| + mu(||c||) + ||c|| ||b||^2 + ||b||^3, with
    mu(s) = s^4 for p >= 1 and s^3 below.
    """
    p, grid = traj.p, traj.grid
    family = family or DiscreteFamily(p, grid)
    phi = family.profile(1.0)
    e_phi, q_phi = energy(phi, p), mass(phi)
    psi0 = traj.snapshots[0]
    q0 = mass(psi0)
    delta0 = energy(psi0, p) - e_phi + q0 - q_phi
    om = series.array("omega")
    lhs = series.array("energy") - e_phi + om * (series.array("mass") - q_phi)
    rhs = delta0 + (om - 1.0) * (q0 - q_phi)
    series.delta_lhs = list(lhs)
    series.delta_rhs = list(rhs)
    mismatch = float(np.max(np.abs(lhs - rhs))) if len(lhs) else 0.0

    tensor = tensor or cubic_tensor(p, grid.num_edges)
    if masses is None:
        masses = neutral_basis(p, grid.num_edges, 1.0, grid).pairings
    masses = np.asarray(masses, dtype=float)
    delta = distance_to_orbit(psi0, phi)
    ratios = []
    for i in range(len(series)):
        c, b = np.asarray(series.c[i]), np.asarray(series.b[i])
        nc, nb = np.linalg.norm(c), np.linalg.norm(b)
        h0 = float(np.sum(masses * b**2)) + m0(c, tensor)
        mu = nc**4 if p >= 1 else nc**3
        bound = delta**2 + abs(h0) + mu + nc * nb**2 + nb**3
        lhs_i = (om[i] - 1.0) ** 2 + series.norm_uperp[i] ** 2 + series.norm_wperp[i] ** 2
        ratios.append(lhs_i / bound if bound > 0 else (0.0 if lhs_i < 1e-20 else math.inf))
    ratios = np.asarray(ratios)
    return BudgetReport(float(delta0), mismatch, ratios, float(np.max(ratios)) if len(ratios) else 0.0)


@dataclass(frozen=True)
class RateReport:
    sup_theta_dot_minus_omega: float
    sup_omega_dot: float
    ratio_theta: float
    ratio_omega: float


def parameter_rate_check(series: ModulationSeries) -> RateReport:
    """Finite-difference theta and omega; compare with the quadratic bounds."""
    if len(series) < 10:
        raise DomainError(f"need at least 10 samples for rate estimates, got {len(series)}")
    t = series.array("t")
    steps = np.diff(t)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise DomainError("rate check needs a uniformly sampled series")
    theta, omega = series.array("theta"), series.array("omega")
    theta_dot = np.gradient(theta, t, edge_order=2)
    omega_dot = np.gradient(omega, t, edge_order=2)
    nu, nw = series.array("norm_u"), series.array("norm_w")
    a = np.abs(theta_dot - omega)
    b = np.abs(omega_dot)
    with np.errstate(divide="ignore", invalid="ignore"):
        ra = np.where(nu**2 + nw**2 > 1e-20, a / (nu**2 + nw**2), 0.0)
        rb = np.where(nu * nw > 1e-20, b / (nu * nw), 0.0)
    return RateReport(float(a.max()), float(b.max()), float(ra.max()), float(rb.max()))


def project_initial_perturbation(u0: GraphField, w0: GraphField, family) -> tuple[GraphField, GraphField]:
    """Remove the Phi component of U0 and the d_omega Phi component of W0."""
    phi, dphi = family.profile(1.0), family.d_omega(1.0)
    u0 = u0 - (l2_inner(u0, phi) / l2_inner(phi, phi)) * phi
    w0 = w0 - (l2_inner(w0, dphi) / l2_inner(dphi, dphi)) * dphi
    return u0, w0


__all__ = [
    "BudgetReport", "ModulationFrame", "ModulationSeries", "RateReport", "decompose_primary",
    "decompose_secondary", "energy_budget", "full_frame", "parameter_rate_check",
    "project_initial_perturbation", "track",
]
