"""Half-soliton states, their masses and energies, and the stationary family.

The half-soliton glues sech^{1/p}(p x) along every edge at its maximum.
Two parametrisations of the family in omega are provided:

* ``ClosedFormFamily`` samples the analytic profile and differentiates the
  scaling law in closed form.
* ``DiscreteFamily`` refines each member by Newton's method into an exact
  solution of the discrete stationary equation, so that it is an exact
  standing wave of the semi-discrete flow.  Its omega-derivatives come from
  linear solves, not finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve_banded

from .errors import ConvergenceError, DomainError
from .grid import (GraphField, StarGraphGrid, apply_hamiltonian, dirichlet_form,
                   l2_inner)


def _check_p(p: float) -> None:
    if not p > 0:
        raise DomainError(f"nonlinearity power must be positive, got {p}")


def _check_omega(omega: float) -> None:
    if not omega > 0:
        raise DomainError(f"frequency must be positive, got {omega}")


def log_sech(y):
    y = np.abs(np.asarray(y, dtype=float))
    return np.log(2.0) - y - np.log1p(np.exp(-2.0 * y))


def phi(x, p: float):
    """sech^{1/p}(p x), evaluated without overflow."""
    return np.exp(log_sech(p * np.asarray(x, dtype=float)) / p)


def dphi(x, p: float):
    x = np.asarray(x, dtype=float)
    return -phi(x, p) * np.tanh(p * x)


def d2phi(x, p: float):
    f = phi(x, p)
    return f - (p + 1) * f ** (2 * p + 1)


def default_length(p: float, tol: float = 1e-12) -> float:
    """Smallest round truncation length L >= 30 with phi(L) below ``tol``."""
    _check_p(p)
    need = np.log(2.0) / p - np.log(tol)
    return float(max(30.0, np.ceil(need)))


def profile(x, p: float, omega: float = 1.0):
    """omega^{1/2p} phi(omega^{1/2} x)."""
    return omega ** (0.5 / p) * phi(np.sqrt(omega) * np.asarray(x), p)


def profile_domega(x, p: float, omega: float = 1.0):
    """d/domega of ``profile``: omega^{a-1} [phi/2p + z phi'/2], z = omega^{1/2} x."""
    a = 0.5 / p
    z = np.sqrt(omega) * np.asarray(x, dtype=float)
    return omega ** (a - 1.0) * (phi(z, p) * a + 0.5 * z * dphi(z, p))


def profile_domega2(x, p: float, omega: float = 1.0):
    a = 0.5 / p
    z = np.sqrt(omega) * np.asarray(x, dtype=float)
    f, f1, f2 = phi(z, p), dphi(z, p), d2phi(z, p)
    big = a * f + 0.5 * z * f1
    big_prime = a * f1 + 0.5 * f1 + 0.5 * z * f2
    return omega ** (a - 2.0) * ((a - 1.0) * big + 0.5 * z * big_prime)


@dataclass(frozen=True, eq=False)
class StationaryState:
    p: float
    omega: float
    field: GraphField


def half_soliton(p: float, omega: float, grid: StarGraphGrid) -> StationaryState:
    _check_p(p)
    _check_omega(omega)
    field = GraphField.from_profile(grid, lambda x: profile(x, p, omega))
    return StationaryState(p, omega, field)


def stationary_residual(s: StationaryState) -> float:
    """Max-norm of -Delta Phi + omega Phi - (p+1) |Phi|^{2p} Phi over stored nodes."""
    f = s.field
    r = apply_hamiltonian(f).data + s.omega * f.data - (s.p + 1) * np.abs(f.data) ** (2 * s.p) * f.data
    return float(np.max(np.abs(r)))


def mass(psi: GraphField) -> float:
    return float(np.real(l2_inner(psi, psi)))


def energy(psi: GraphField, p: float) -> float:
    """||Psi'||^2 - ||Psi||^{2p+2}_{2p+2}, gradient term as the discrete Dirichlet form.

    This is the quantity conserved by the midpoint time stepper for p = 1.
    """
    pot = np.sum(psi.grid.weights * np.abs(psi.data) ** (2 * p + 2))
    return dirichlet_form(psi) - float(pot)


def mass_energy(s: StationaryState) -> tuple[float, float]:
    return mass(s.field), energy(s.field, s.p)


def half_line_phi_mass(p: float) -> float:
    """int_0^inf phi^2 by adaptive quadrature."""
    _check_p(p)
    val, _ = quad(lambda x: float(phi(x, p)) ** 2, 0.0, np.inf, epsabs=1e-14, epsrel=1e-13)
    return val


def edge_phi_mass(p: float, grid: StarGraphGrid) -> float:
    """int_0^L phi^2 by the trapezoid rule on one edge of ``grid``."""
    return float(np.sum(grid.edge_weights * phi(grid.x, p) ** 2))


def mass_derivative(p: float, omega: float, num_edges: int, grid: StarGraphGrid | None = None) -> float:
    """d/domega ||Phi_omega||^2 = N (1/p - 1/2) omega^{1/p - 3/2} int phi^2."""
    _check_p(p)
    _check_omega(omega)
    if grid is None:
        grid = StarGraphGrid(num_edges, default_length(p), int(default_length(p) * 100))
    return num_edges * (1.0 / p - 0.5) * omega ** (1.0 / p - 1.5) * edge_phi_mass(p, grid)


# -- omega families ---------------------------------------------------------------

class ClosedFormFamily:
    """Sampled closed-form half-solitons with analytic omega-derivatives."""

    def __init__(self, p: float, grid: StarGraphGrid):
        _check_p(p)
        self.p = p
        self.grid = grid

    def _field(self, fn, omega):
        _check_omega(omega)
        return GraphField.from_profile(self.grid, lambda x: fn(x, self.p, omega))

    def profile(self, omega: float) -> GraphField:
        return self._field(profile, omega)

    def d_omega(self, omega: float) -> GraphField:
        return self._field(profile_domega, omega)

    def d2_omega(self, omega: float) -> GraphField:
        return self._field(profile_domega2, omega)


class DiscreteFamily:
    """Exact solutions of the discrete stationary equation, one edge profile per omega.

    By edge symmetry the graph problem reduces to one edge whose vertex row is
    (2/h^2)(v - f_1); the reduced Jacobian is tridiagonal.
    """

    def __init__(self, p: float, grid: StarGraphGrid, tol: float = 1e-13, max_iter: int = 50):
        _check_p(p)
        self.p = p
        self.grid = grid
        self.tol = tol
        self.max_iter = max_iter
        self._cache: dict[float, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def _operator(self):
        m, h = self.grid.points_per_edge, self.grid.h
        inv = 1.0 / h**2
        n = m  # nodes 0..M-1
        diag = np.full(n, 2.0 * inv)
        upper = np.full(n - 1, -inv)
        lower = np.full(n - 1, -inv)
        upper[0] = -2.0 * inv
        return diag, upper, lower

    def _banded(self, diag, upper, lower):
        ab = np.zeros((3, len(diag)))
        ab[0, 1:] = upper
        ab[1] = diag
        ab[2, :-1] = lower
        return ab

    def _apply(self, f, diag, upper, lower):
        out = diag * f
        out[:-1] += upper * f[1:]
        out[1:] += lower * f[:-1]
        return out

    def _solve(self, omega: float):
        key = float(omega)
        if key in self._cache:
            return self._cache[key]
        _check_omega(omega)
        p = self.p
        m = self.grid.points_per_edge
        x = self.grid.x[:m]
        f = profile(x, p, omega)
        if self._cache:
            near = min(self._cache, key=lambda w: abs(w - key))
            if abs(near - key) < 0.2:
                f0, df0, _ = self._cache[near]
                f = f0 + (key - near) * df0
        diag, upper, lower = self._operator()
        for _ in range(self.max_iter):
            res = self._apply(f, diag, upper, lower) + omega * f - (p + 1) * np.abs(f) ** (2 * p) * f
            jd = diag + omega - (p + 1) * (2 * p + 1) * np.abs(f) ** (2 * p)
            step = solve_banded((1, 1), self._banded(jd, upper, lower), res)
            f = f - step
            if np.max(np.abs(step)) <= self.tol * max(1.0, np.max(np.abs(f))):
                break
        else:
            raise ConvergenceError(f"discrete stationary state did not converge at omega={omega}")
        jd = diag + omega - (p + 1) * (2 * p + 1) * np.abs(f) ** (2 * p)
        ab = self._banded(jd, upper, lower)
        df = solve_banded((1, 1), ab, -f)
        rhs2 = -2.0 * df + 2 * p * (p + 1) * (2 * p + 1) * np.abs(f) ** (2 * p - 1) * df**2
        d2f = solve_banded((1, 1), ab, rhs2)
        out = (f, df, d2f)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = out
        return out

    def _to_field(self, edge_vals: np.ndarray) -> GraphField:
        g = self.grid
        full = np.zeros(g.points_per_edge + 1)
        full[:-1] = edge_vals
        return GraphField.from_edges(g, np.tile(full, (g.num_edges, 1)))

    def profile(self, omega: float) -> GraphField:
        return self._to_field(self._solve(omega)[0])

    def d_omega(self, omega: float) -> GraphField:
        return self._to_field(self._solve(omega)[1])

    def d2_omega(self, omega: float) -> GraphField:
        return self._to_field(self._solve(omega)[2])


def discrete_half_soliton(p: float, omega: float, grid: StarGraphGrid) -> StationaryState:
    """Half-soliton refined to an exact root of the discrete stationary equation."""
    return StationaryState(p, omega, DiscreteFamily(p, grid).profile(omega))
