"""Cubic expansion of the action near the half-soliton and the reduced energy M(c)."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import ConvergenceError, DomainError, InconsistencyError
from .grid import GraphField, StarGraphGrid, dirichlet_form, gregory_edge_weights, laplacian_matrix
from .spectral import edge_vectors, neutral_basis
from .stationary import DiscreteFamily, default_length, phi


def cubic_prefactor(p: float) -> float:
    return p * (p + 1) * (2 * p + 1)


def cubic_edge_integral(p: float) -> float:
    """int_0^inf phi^{2p-1} (phi')^3 dx in closed form."""
    return -p / (2 * (p + 1) * (2 * p + 1))


def diagonal_entry(p: float, j: int) -> float:
    return p * j * (j * j - 1) / (2 * (p + 1) * (2 * p + 1))


def structure_constants(num_edges: int) -> np.ndarray:
    """S_ijk = sum_m (e_i)_m (e_j)_m (e_k)_m."""
    e = edge_vectors(num_edges)
    return np.einsum("im,jm,km->ijk", e, e, e)


@dataclass(frozen=True, eq=False)
class CubicTensor:
    p: float
    num_edges: int
    entries: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "k", "value"])
        n = self.entries.shape[0]
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    w.writerow([i + 1, j + 1, k + 1, f"{self.entries[i, j, k]:.15g}"])
        return buf.getvalue()


def tensor_grid(p: float, num_edges: int) -> StarGraphGrid:
    length = default_length(p)
    return StarGraphGrid(num_edges, length, int(round(length / 0.0025)))


def cubic_tensor(p: float, num_edges: int, grid: StarGraphGrid | None = None,
                 check_tol: float = 1e-8) -> CubicTensor:
    """T_ijk = <Phi^{2p-1} U_i U_j, U_k>, assembled by quadrature and checked."""
    if p < 0.5:
        raise DomainError(f"the cubic expansion needs p >= 1/2, got {p}")
    if num_edges < 3:
        raise DomainError(f"star graph needs N >= 3 edges, got {num_edges}")
    grid = grid or tensor_grid(p, num_edges)
    basis = neutral_basis(p, num_edges, 1.0, grid) if p < 2 else None
    if basis is None:
        raise DomainError("the cubic tensor is only built for p < 2")
    # the integrand behaves like x^3 at the vertex, so end corrections matter
    wq = gregory_edge_weights(grid) * phi(grid.x, p) ** (2 * p - 1)
    modes = [u.edges() for u in basis.modes]
    n = len(modes)
    t = np.zeros((n, n, n))
    for i in range(n):
        for j in range(i, n):
            prod = wq * modes[i] * modes[j]
            for k in range(j, n):
                val = float(np.sum(prod * modes[k]))
                for a, b, c in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                    t[a, b, c] = val
    expected = structure_constants(num_edges) * cubic_edge_integral(p)
    if np.max(np.abs(t - expected)) > check_tol:
        raise InconsistencyError("assembled cubic tensor departs from its separable form")
    return CubicTensor(p, num_edges, t)


def m0(c, tensor: CubicTensor) -> float:
    c = np.asarray(c, dtype=float)
    if c.shape != (tensor.num_edges - 1,):
        raise DomainError(f"coefficient vector must have length {tensor.num_edges - 1}")
    p = tensor.p
    return -2.0 / 3.0 * cubic_prefactor(p) * float(np.einsum("i,j,k,ijk->", c, c, c, tensor.entries))


def m0_closed_form(c, p: float) -> float:
    """Explicit cubic energies for N = 3 and N = 4."""
    c = np.asarray(c, dtype=float)
    if len(c) == 2:
        c1, c2 = c
        return 2 * p**2 * (c1**2 - c2**2) * c2
    if len(c) == 3:
        c1, c2, c3 = c
        return 2 * p**2 * (c1**2 * c2 + c1**2 * c3 - c2**3 + 3 * c2**2 * c3 - 4 * c3**3)
    raise DomainError("closed forms exist for N = 3 and N = 4 only")


# -- transverse minimiser -------------------------------------------------------

def action(psi: GraphField, p: float, omega: float = 1.0) -> float:
    """Lambda = E + omega Q with the discrete Dirichlet form as gradient energy."""
    w = psi.grid.weights
    a = np.abs(psi.data)
    return dirichlet_form(psi) + omega * float(np.sum(w * a**2)) - float(np.sum(w * a ** (2 * p + 2)))


def landscape_grid(num_edges: int, h: float = 0.025, length: float = 30.0) -> StarGraphGrid:
    return StarGraphGrid.with_spacing(num_edges, h, length)


@dataclass(frozen=True, eq=False)
class MinimizerResult:
    u_perp: GraphField
    value: float
    iterations: int


class ActionLandscape:
    """Discrete action around the exact discrete half-soliton on one grid."""

    def __init__(self, p: float, grid: StarGraphGrid):
        if not 0.5 <= p < 2:
            raise DomainError(f"the saddle analysis needs p in [1/2, 2), got {p}")
        self.p = p
        self.grid = grid
        self.phi = DiscreteFamily(p, grid).profile(1.0)
        self.basis = neutral_basis(p, grid.num_edges, 1.0, grid)
        w = grid.weights
        self._wk = sp.diags(w) @ laplacian_matrix(grid)
        self._constraints = np.column_stack([w * self.phi.data] + [w * u.data for u in self.basis.modes])
        self.base_action = action(self.phi, p)

    def kernel_part(self, c) -> GraphField:
        c = np.asarray(c, dtype=float)
        out = GraphField.zeros(self.grid)
        for cj, u in zip(c, self.basis.modes):
            out = out + cj * u
        return out

    def _grad_hess(self, psi: np.ndarray):
        p, w = self.p, self.grid.weights
        a = np.abs(psi)
        grad = 2.0 * (self._wk @ psi + w * psi - (p + 1) * w * a ** (2 * p) * psi)
        hdiag = 2.0 * w * (1.0 - (p + 1) * (2 * p + 1) * a ** (2 * p))
        return grad, 2.0 * self._wk + sp.diags(hdiag)

    def transverse_minimizer(self, c, tol: float = 1e-12, max_iter: int = 50) -> MinimizerResult:
        c = np.asarray(c, dtype=float)
        if c.shape != (self.grid.num_edges - 1,):
            raise DomainError(f"coefficient vector must have length {self.grid.num_edges - 1}")
        if np.linalg.norm(c) > 0.1:
            raise DomainError("transverse minimiser is restricted to ||c|| <= 0.1")
        fixed = self.phi.data + self.kernel_part(c).data
        cmat = sp.csr_matrix(self._constraints)
        v = np.zeros(self.grid.size)
        w = self.grid.weights

        def residual(vec):
            grad, hess = self._grad_hess(fixed + vec)
            # multipliers from the least-squares fit of the gradient onto the constraint normals
            mu, *_ = np.linalg.lstsq(self._constraints / np.sqrt(w)[:, None], grad / np.sqrt(w), rcond=None)
            r = grad - self._constraints @ mu
            return float(np.sqrt(np.sum(r**2 / w))), grad, hess

        res, grad, hess = residual(v)
        for it in range(max_iter):
            if res <= tol:
                break
            kkt = sp.bmat([[hess, cmat], [cmat.T, None]], format="csc")
            rhs = np.concatenate([-grad, -(cmat.T @ v)])
            step = spsolve(kkt, rhs)[: self.grid.size]
            damping = 1.0
            while True:
                trial = v + damping * step
                new_res, new_grad, new_hess = residual(trial)
                if new_res < res or damping < 1e-3:
                    break
                damping *= 0.5
            v, res, grad, hess = trial, new_res, new_grad, new_hess
        else:
            if res > tol:
                raise ConvergenceError(f"transverse Newton did not converge (residual {res:.3e})")
        u_perp = GraphField(self.grid, v)
        value = action(GraphField(self.grid, fixed + v), self.p) - self.base_action
        return MinimizerResult(u_perp, value, it)

    def quadratic_at_phi(self, u: GraphField) -> float:
        """Second variation <L+ u, u> with the discrete operator."""
        _, hess = self._grad_hess(self.phi.data)
        return 0.5 * float(u.data @ (hess @ u.data))


def transverse_minimizer(c, p: float, num_edges: int | None = None, grid: StarGraphGrid | None = None,
                         tol: float = 1e-12) -> tuple[GraphField, float]:
    c = np.asarray(c, dtype=float)
    if grid is None:
        grid = landscape_grid(num_edges or len(c) + 1)
    res = ActionLandscape(p, grid).transverse_minimizer(c, tol)
    return res.u_perp, res.value


def saddle_witness(p: float, num_edges: int, t: float = 0.02,
                   landscape: ActionLandscape | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Two small coefficient vectors with M > 0 and M < 0 along the last neutral mode."""
    if not 0.5 <= p < 2:
        raise DomainError(f"the saddle analysis needs p in [1/2, 2), got {p}")
    landscape = landscape or ActionLandscape(p, landscape_grid(num_edges))
    d = np.zeros(num_edges - 1)
    d[-1] = 1.0
    sign = math.copysign(1.0, diagonal_entry(p, num_edges - 1))
    c_minus = sign * t * d
    c_plus = -c_minus
    m_plus = landscape.transverse_minimizer(c_plus).value
    m_minus = landscape.transverse_minimizer(c_minus).value
    if not (m_plus > 0 > m_minus):
        raise InconsistencyError(f"saddle witness failed: M(+)={m_plus:.3e}, M(-)={m_minus:.3e}")
    return c_plus, c_minus


def fit_order(ts, values) -> float:
    """Least-squares slope of log|values| against log ts."""
    return float(np.polyfit(np.log(ts), np.log(np.abs(values)), 1)[0])


__all__ = [
    "ActionLandscape", "CubicTensor", "action", "cubic_tensor", "m0", "m0_closed_form",
    "saddle_witness", "transverse_minimizer", "diagonal_entry", "fit_order", "landscape_grid",
    "structure_constants", "tensor_grid",
]
