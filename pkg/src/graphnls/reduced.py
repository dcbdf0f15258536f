"""Truncated Hamiltonian system for the kernel-mode amplitudes.

State: positions gamma_j and velocities beta_j, j = 1..N-1, with

    m_j gamma_j'' = K sum_{k,n} T[k,n,j] gamma_k gamma_n,   K = p(p+1)(2p+1),

and conserved energy H0 = sum_j m_j beta_j^2 + M0(gamma).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .action import CubicTensor, cubic_prefactor, cubic_tensor, diagonal_entry, m0
from .errors import DomainError, EscapeTimeout
from .spectral import neutral_basis
from .stationary import half_line_phi_mass


@dataclass(frozen=True)
class ReducedState:
    gamma: np.ndarray
    beta: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if self.gamma.shape != self.beta.shape or self.gamma.ndim != 1:
            raise DomainError("gamma and beta must be vectors of equal length")

    @classmethod
    def zeros(cls, dim: int) -> "ReducedState":
        return cls(np.zeros(dim), np.zeros(dim))


def closed_form_masses(p: float, num_edges: int) -> np.ndarray:
    j = np.arange(1, num_edges)
    return 0.25 * half_line_phi_mass(p) * j * (j + 1)


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    p: float
    num_edges: int
    masses: np.ndarray
    tensor: CubicTensor

    @property
    def dim(self) -> int:
        return self.num_edges - 1

    @classmethod
    def build(cls, p: float, num_edges: int, grid=None) -> "ReducedSystem":
        """Masses from the quadrature pairings <W_j, U_j>, tensor by quadrature."""
        tensor = cubic_tensor(p, num_edges, grid)
        if grid is None:
            from .action import tensor_grid
            grid = tensor_grid(p, num_edges)
        masses = np.asarray(neutral_basis(p, num_edges, 1.0, grid).pairings, dtype=float)
        return cls(p, num_edges, masses, tensor)

    def force(self, gamma: np.ndarray) -> np.ndarray:
        quad = np.einsum("k,n,knj->j", gamma, gamma, self.tensor.entries)
        return cubic_prefactor(self.p) * quad / self.masses

    def hamiltonian(self, s: ReducedState) -> float:
        return float(np.sum(self.masses * s.beta**2)) + m0(s.gamma, self.tensor)


def reduced_rhs(s: ReducedState, sys: ReducedSystem) -> tuple[np.ndarray, np.ndarray]:
    if s.gamma.shape != (sys.dim,):
        raise DomainError(f"state has dimension {s.gamma.size}, system expects {sys.dim}")
    return s.beta.copy(), sys.force(s.gamma)


def h0(s: ReducedState, sys: ReducedSystem) -> float:
    return sys.hamiltonian(s)


@dataclass(eq=False)
class ReducedTrajectory:
    t: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    H0: np.ndarray
    diverged: bool = False

    @property
    def final(self) -> ReducedState:
        return ReducedState(self.gamma[-1], self.beta[-1], float(self.t[-1]))

    def h0_drift(self, max_norm: float | None = None) -> float:
        """Largest |H0(t) - H0(0)|, optionally only while ||gamma|| <= max_norm."""
        h = self.H0
        if max_norm is not None:
            inside = np.linalg.norm(self.gamma, axis=1) <= max_norm
            stop = len(h) if inside.all() else int(np.argmin(inside))
            h = h[:max(stop, 1)]
        return float(np.max(np.abs(h - h[0])))

    def to_csv(self) -> str:
        dim = self.gamma.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"gamma_{j}" for j in range(1, dim + 1)]
                   + [f"beta_{j}" for j in range(1, dim + 1)] + ["H0"])
        for k in range(len(self.t)):
            w.writerow([f"{v:.15g}" for v in (self.t[k], *self.gamma[k], *self.beta[k], self.H0[k])])
        return buf.getvalue()


def integrate_reduced(s0: ReducedState, sys: ReducedSystem, dt: float = 1e-3, t_end: float = 10.0,
                      stride: int = 1, blowup: float = 10.0) -> ReducedTrajectory:
    """Velocity Verlet. Stops early, flagged as diverged, once ||gamma|| > ``blowup``."""
    if not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    if s0.gamma.shape != (sys.dim,):
        raise DomainError(f"state has dimension {s0.gamma.size}, system expects {sys.dim}")
    n_steps = int(math.ceil((t_end - s0.t) / dt - 1e-9))
    g, b = s0.gamma.copy(), s0.beta.copy()
    acc = sys.force(g)
    ts, gs, bs, hs = [s0.t], [g.copy()], [b.copy()], [sys.hamiltonian(s0)]
    diverged = False
    for k in range(1, n_steps + 1):
        b_half = b + 0.5 * dt * acc
        g = g + dt * b_half
        acc = sys.force(g)
        b = b_half + 0.5 * dt * acc
        t = s0.t + k * dt
        stop = not np.linalg.norm(g) <= blowup
        if k % stride == 0 or k == n_steps or stop:
            ts.append(t)
            gs.append(g.copy())
            bs.append(b.copy())
            hs.append(sys.hamiltonian(ReducedState(g, b, t)))
        if stop:
            diverged = True
            break
    return ReducedTrajectory(np.array(ts), np.array(gs), np.array(bs), np.array(hs), diverged)


def escape_time(sys: ReducedSystem, epsilon: float, delta_scale: float = 0.5, dt: float = 1e-3,
                repelling: bool = True, return_h0_drift: bool = False):
    """First time ||gamma|| exceeds epsilon along the scalar reduction on the last mode.

    Only gamma_{N-1} is excited, which is an invariant subspace of the full
    system, so the scalar equation m gamma'' = K T_diag gamma^2 is integrated
    directly.  The crossing time is linearly interpolated between steps.
    """
    if not 0 < epsilon <= 0.2:
        raise DomainError(f"epsilon must lie in (0, 0.2], got {epsilon}")
    j = sys.num_edges - 1
    a = cubic_prefactor(sys.p) * sys.tensor.entries[j - 1, j - 1, j - 1] / sys.masses[j - 1]
    sign = math.copysign(1.0, a) * (1.0 if repelling else -1.0)
    g, b = sign * delta_scale * epsilon, 0.0
    mass = sys.masses[j - 1]
    coeff = -2.0 / 3.0 * cubic_prefactor(sys.p) * sys.tensor.entries[j - 1, j - 1, j - 1]

    def energy(g, b):
        return mass * b * b + coeff * g**3

    e0 = energy(g, b)
    drift = 0.0
    t_max = 100.0 / math.sqrt(epsilon)
    acc = a * g * g
    t = 0.0
    while t < t_max:
        b_half = b + 0.5 * dt * acc
        g_new = g + dt * b_half
        acc = a * g_new * g_new
        b = b_half + 0.5 * dt * acc
        t += dt
        if abs(g_new) > epsilon:
            frac = (epsilon - abs(g)) / (abs(g_new) - abs(g))
            t0 = t - dt + frac * dt
            return (t0, drift) if return_h0_drift else t0
        g = g_new
        drift = max(drift, abs(energy(g, b) - e0))
    raise EscapeTimeout(f"no escape before t = {t_max:.4g} at epsilon = {epsilon}")


def scalar_coefficient(p: float, num_edges: int) -> float:
    """a in gamma'' = a gamma^2 for the last mode, from the closed forms."""
    j = num_edges - 1
    m = 0.25 * half_line_phi_mass(p) * j * (j + 1)
    return cubic_prefactor(p) * diagonal_entry(p, j) / m


def fit_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def reverse(s: ReducedState) -> ReducedState:
    return replace(s, beta=-s.beta)


__all__ = [
    "ReducedState", "ReducedSystem", "ReducedTrajectory", "closed_form_masses", "escape_time",
    "fit_slope", "h0", "integrate_reduced", "reduced_rhs", "reverse", "scalar_coefficient",
]
