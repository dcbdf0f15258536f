"""Midpoint Crank-Nicolson integration of i Psi_t = -Delta Psi - (p+1)|Psi|^{2p} Psi on the star graph."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import zgttrf, zgttrs

from .errors import DomainError, StepFailure
from .grid import GraphField, StarGraphGrid, distance_to_orbit, laplacian_matrix, l2_norm
from .stationary import energy, mass

BLOWUP_TIME_CAP = 10.0


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float = 0.005
    t_end: float = 10.0
    p: float = 1.0
    solver_tol: float = 1e-12
    max_fixed_point_iters: int = 100
    stride: int = 1
    nonlinear: bool = True  # test hook: False drops the nonlinearity

    def __post_init__(self):
        if not 0 < self.dt <= 0.1:
            raise DomainError(f"dt must lie in (0, 0.1], got {self.dt}")
        if not self.solver_tol < 1e-8:
            raise DomainError(f"solver_tol must be below 1e-8, got {self.solver_tol}")
        if not self.p > 0:
            raise DomainError(f"nonlinearity power must be positive, got {self.p}")
        if self.stride < 1:
            raise DomainError("stride must be a positive integer")
        if self.t_end < 0:
            raise DomainError("t_end must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class CrankNicolson:
    """Stepper bound to one grid and one config; the linear factorisation is reused."""

    def __init__(self, grid: StarGraphGrid, cfg: EvolutionConfig):
        self.grid = grid
        self.cfg = cfg
        h2 = grid.h**2
        a = 1j / cfg.dt
        n = grid.points_per_edge - 1
        diag = np.full(n, a - 1.0 / h2, dtype=complex)
        off = np.full(n - 1, 0.5 / h2, dtype=complex)
        self._lu = zgttrf(off.copy(), diag.copy(), off.copy())
        if self._lu[-1] != 0:
            raise StepFailure("edge tridiagonal system is singular")
        e1 = np.zeros(n, dtype=complex)
        e1[0] = 0.5 / h2
        self._z = self._tri_solve(e1[:, None])[:, 0]
        self._vertex_coeff = a - 1.0 / h2 - self._z[0] / h2
        self._half_k = 0.5 * laplacian_matrix(grid)
        self._a = a

    def _tri_solve(self, rhs: np.ndarray) -> np.ndarray:
        dl, d, du, du2, ipiv, _ = self._lu
        out, info = zgttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise StepFailure("tridiagonal back-substitution failed")
        return out

    def solve_linear(self, r: np.ndarray) -> np.ndarray:
        """Solve (i/dt - K/2) y = r through per-edge sweeps and one vertex closure."""
        g = self.grid
        n_int = g.points_per_edge - 1
        edges = r[1:].reshape(g.num_edges, n_int).T
        s = self._tri_solve(np.ascontiguousarray(edges))
        h2 = g.h**2
        v = (r[0] - s[0].sum() / (g.num_edges * h2)) / self._vertex_coeff
        y = s - v * self._z[:, None]
        out = np.empty_like(r, dtype=complex)
        out[0] = v
        out[1:] = y.T.reshape(-1)
        return out

    def nonlinear_term(self, new: np.ndarray, old: np.ndarray) -> np.ndarray:
        p = self.cfg.p
        dens = 0.5 * (np.abs(new) ** (2 * p) + np.abs(old) ** (2 * p))
        return (p + 1) * dens * 0.5 * (new + old)

    def step(self, psi: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        base = self._a * psi + self._half_k @ psi
        if not cfg.nonlinear:
            return self.solve_linear(base)
        new = self.solve_linear(base - self.nonlinear_term(psi, psi))
        scale = max(1.0, float(np.max(np.abs(psi))))
        for _ in range(cfg.max_fixed_point_iters):
            nxt = self.solve_linear(base - self.nonlinear_term(new, psi))
            change = float(np.max(np.abs(nxt - new)))
            new = nxt
            if change <= cfg.solver_tol * scale:
                return new
        raise StepFailure(
            f"fixed-point iteration did not reach {cfg.solver_tol:g} in {cfg.max_fixed_point_iters} "
            f"iterations (last change {change:.3e}); try a smaller dt")


def step(psi: GraphField, cfg: EvolutionConfig) -> GraphField:
    stepper = CrankNicolson(psi.grid, cfg)
    return GraphField(psi.grid, stepper.step(np.asarray(psi.data, dtype=complex)))


@dataclass(eq=False)
class Trajectory:
    grid: StarGraphGrid
    p: float
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    E: list = field(default_factory=list)
    Q: list = field(default_factory=list)
    dist: list = field(default_factory=list)

    def record(self, t: float, data: np.ndarray, reference: GraphField | None) -> None:
        if self.times and t <= self.times[-1]:
            raise DomainError("trajectory time stamps must increase")
        f = GraphField(self.grid, data.copy())
        self.times.append(t)
        self.snapshots.append(f)
        self.E.append(energy(f, self.p))
        self.Q.append(mass(f))
        self.dist.append(distance_to_orbit(f, reference) if reference is not None else math.nan)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    def drift(self, which: str) -> float:
        """Largest relative deviation of E or Q from its initial value."""
        series = np.asarray(self.E if which == "E" else self.Q)
        return float(np.max(np.abs(series - series[0])) / abs(series[0]))

    def observables_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "E", "Q", "dist_orbit"])
        for row in zip(self.times, self.E, self.Q, self.dist):
            w.writerow([f"{v:.15g}" for v in row])
        return buf.getvalue()

    def snapshot_csv(self, index: int) -> str:
        f = self.snapshots[index]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["edge", "x", "re", "im"])
        vals = f.edges()
        for j in range(self.grid.num_edges):
            for x, z in zip(self.grid.x, vals[j]):
                w.writerow([j + 1, f"{x:.15g}", f"{z.real:.15g}", f"{z.imag:.15g}"])
        return buf.getvalue()


def run(psi0: GraphField, cfg: EvolutionConfig, reference: GraphField | None = None,
        stop_distance: float | None = None) -> Trajectory:
    """Iterate ``step`` and record observables every ``cfg.stride`` steps.

    With ``stop_distance`` the run ends at the first recorded orbit distance
    above it.  A failed step raises StepFailure carrying the partial
    trajectory as ``exc.partial``.
    """
    t_end = cfg.t_end
    if cfg.p >= 2:
        warnings.warn(f"p = {cfg.p} lies in the blow-up regime; capping t_end at {BLOWUP_TIME_CAP}",
                      RuntimeWarning, stacklevel=2)
        t_end = min(t_end, BLOWUP_TIME_CAP)
    n_steps = int(round(t_end / cfg.dt))
    stepper = CrankNicolson(psi0.grid, cfg)
    traj = Trajectory(psi0.grid, cfg.p)
    psi = np.asarray(psi0.data, dtype=complex).copy()
    traj.record(0.0, psi, reference)
    for k in range(1, n_steps + 1):
        try:
            psi = stepper.step(psi)
        except StepFailure as exc:
            exc.partial = traj
            exc.time = (k - 1) * cfg.dt
            raise
        if k % cfg.stride == 0 or k == n_steps:
            traj.record(k * cfg.dt, psi, reference)
            if stop_distance is not None and traj.dist[-1] > stop_distance:
                break
    return traj


def unitarity_defect(traj: Trajectory) -> float:
    norms = np.array([l2_norm(f) for f in traj.snapshots])
    return float(np.max(np.abs(norms - norms[0])))


__all__ = ["CrankNicolson", "EvolutionConfig", "Trajectory", "run", "step", "unitarity_defect"]
