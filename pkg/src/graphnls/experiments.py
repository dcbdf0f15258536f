"""Experiment drivers shared by the command line and the acceptance tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .errors import EscapeTimeout, StepFailure
from .evolution import EvolutionConfig, Trajectory, run
from .grid import GraphField, StarGraphGrid, h1_norm
from .modulation import BudgetReport, ModulationSeries, energy_budget, project_initial_perturbation, track
from .reduced import ReducedState, ReducedSystem, escape_time, fit_slope, integrate_reduced
from .spectral import neutral_basis
from .stationary import DiscreteFamily


def grid_for(cfg: ExperimentConfig) -> StarGraphGrid:
    return StarGraphGrid(cfg.N, cfg.L, cfg.M)


def unit_direction(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.direction:
        d = np.asarray(cfg.direction, dtype=float)
    else:
        d = np.zeros(cfg.N - 1)
        d[-1] = 1.0
    return d


def initial_data(cfg: ExperimentConfig, family: DiscreteFamily | None = None):
    """Psi0 = e^{i seed_phase} (Phi + U0 + i W0) with ||U0 + i W0||_{H1} = delta.

    ``position`` puts the kick into U0 = delta D / ||D||, D = sum d_j U_j;
    ``momentum`` puts it into W0 built the same way from the W_j.
    Both are projected onto the constraint set before rescaling.
    """
    grid = grid_for(cfg)
    family = family or DiscreteFamily(cfg.p, grid)
    basis = neutral_basis(cfg.p, cfg.N, 1.0, grid)
    d = unit_direction(cfg)
    zero = GraphField.zeros(grid)
    pool = basis.modes if cfg.mode == "position" else basis.generalized
    kick = zero
    for dj, f in zip(d, pool):
        kick = kick + dj * f
    u0, w0 = (kick, zero) if cfg.mode == "position" else (zero, kick)
    u0, w0 = project_initial_perturbation(u0, w0, family)
    size = math.hypot(h1_norm(u0), h1_norm(w0))
    delta = cfg.delta_value
    if size > 0:
        u0, w0 = (delta / size) * u0, (delta / size) * w0
    phi = family.profile(1.0)
    psi0 = (phi + u0 + 1j * w0) * np.exp(1j * cfg.seed_phase)
    return psi0, phi, family


def crossing_time(t, values, level: float) -> float | None:
    t, values = np.asarray(t), np.asarray(values)
    above = np.nonzero(values > level)[0]
    if len(above) == 0:
        return None
    k = int(above[0])
    if k == 0:
        return float(t[0])
    frac = (level - values[k - 1]) / (values[k] - values[k - 1])
    return float(t[k - 1] + frac * (t[k] - t[k - 1]))


@dataclass(eq=False)
class InstabilityResult:
    cfg: ExperimentConfig
    trajectory: Trajectory
    series: ModulationSeries
    budget: BudgetReport | None
    escape_time: float | None
    delta: float
    failure: str = ""

    @property
    def max_distance(self) -> float:
        return float(np.max(self.trajectory.dist))


def instability(cfg: ExperimentConfig, stop_early: bool = True, with_budget: bool = True) -> InstabilityResult:
    psi0, phi, family = initial_data(cfg)
    ecfg = EvolutionConfig(dt=cfg.dt, t_end=cfg.t_end, p=cfg.p, stride=cfg.stride)
    stop = cfg.stop_factor * cfg.epsilon if stop_early else None
    failure = ""
    try:
        traj = run(psi0, ecfg, reference=phi, stop_distance=stop)
    except StepFailure as exc:
        traj = exc.partial
        failure = f"step failure at t = {exc.time:.6g}: {exc}"
    series = track(traj, family, guess=(cfg.seed_phase, 1.0), reference=phi)
    budget = None
    if with_budget and len(series):
        budget = energy_budget(traj, series, family)
    t0 = crossing_time(traj.times, traj.dist, cfg.epsilon)
    return InstabilityResult(cfg, traj, series, budget, t0, cfg.delta_value, failure)


@dataclass(frozen=True)
class ShadowingResult:
    window_end: float
    sup_c_gamma: float
    sup_b_beta: float
    t: np.ndarray
    c: np.ndarray
    gamma: np.ndarray
    b: np.ndarray
    beta: np.ndarray

    def to_csv(self) -> str:
        k = self.c.shape[1]
        head = (["t"] + [f"c_{j}" for j in range(1, k + 1)] + [f"gamma_{j}" for j in range(1, k + 1)]
                + [f"b_{j}" for j in range(1, k + 1)] + [f"beta_{j}" for j in range(1, k + 1)])
        rows = [",".join(head)]
        for i in range(len(self.t)):
            vals = (self.t[i], *self.c[i], *self.gamma[i], *self.b[i], *self.beta[i])
            rows.append(",".join(f"{v:.15g}" for v in vals))
        return "\n".join(rows) + "\n"


def shadowing(result: InstabilityResult, system: ReducedSystem | None = None,
              dt: float = 1e-3) -> ShadowingResult:
    """Integrate the reduced system from gamma(0) = c(0), beta(0) = b(0) and compare."""
    cfg = result.cfg
    series = result.series
    system = system or ReducedSystem.build(cfg.p, cfg.N)
    ends = [series.t[-1]]
    if series.exit_time is not None:
        ends.append(series.exit_time)
    if result.escape_time is not None:
        ends.append(result.escape_time)
    window = min(ends)
    t = series.array("t")
    keep = t <= window + 1e-12
    t = t[keep]
    c = np.asarray(series.c)[keep]
    b = np.asarray(series.b)[keep]
    s0 = ReducedState(c[0], b[0], float(t[0]))
    red = integrate_reduced(s0, system, dt=dt, t_end=float(t[-1]), blowup=math.inf)
    gamma = np.column_stack([np.interp(t, red.t, red.gamma[:, j]) for j in range(system.dim)])
    beta = np.column_stack([np.interp(t, red.t, red.beta[:, j]) for j in range(system.dim)])
    sup_c = float(np.max(np.linalg.norm(c - gamma, axis=1)))
    sup_b = float(np.max(np.linalg.norm(b - beta, axis=1)))
    return ShadowingResult(window, sup_c, sup_b, t, c, gamma, b, beta)


@dataclass(frozen=True)
class SweepRow:
    kind: str
    epsilon: float
    t0: float
    censored: bool


def reduced_sweep(cfg: ExperimentConfig, eps_list, system: ReducedSystem | None = None) -> list[SweepRow]:
    system = system or ReducedSystem.build(cfg.p, cfg.N)
    rows = []
    for eps in eps_list:
        try:
            rows.append(SweepRow("reduced", eps, escape_time(system, eps, cfg.delta_scale, cfg.reduced_dt), False))
        except EscapeTimeout:
            rows.append(SweepRow("reduced", eps, math.nan, True))
    return rows


def pde_escape(cfg: ExperimentConfig) -> SweepRow:
    res = instability(cfg, with_budget=False)
    if res.escape_time is None:
        return SweepRow("pde", cfg.epsilon, math.nan, True)
    return SweepRow("pde", cfg.epsilon, res.escape_time, False)


def fit_rows(rows: list[SweepRow]) -> float:
    good = [r for r in rows if not r.censored]
    if len(good) < 2:
        return math.nan
    return fit_slope([r.epsilon for r in good], [r.t0 for r in good])


__all__ = [
    "InstabilityResult", "ShadowingResult", "SweepRow", "crossing_time", "fit_rows", "grid_for",
    "initial_data", "instability", "pde_escape", "reduced_sweep", "shadowing", "unit_direction",
]
