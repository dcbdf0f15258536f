"""Point spectrum of the linearised operators, neutral modes and quadratic forms.

Eigenvalues of L+ below the continuum edge 1 are located by shooting the
decaying solution of

    -u'' + u - (2p+1)(p+1) sech^2(p x) u = lambda u

back to the vertex: lambda is an eigenvalue iff u(0) = 0 (odd type,
multiplicity N-1 on the star graph) or u'(0) = 0 (even type, simple).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InconsistencyError, SolverError
from .grid import (GraphField, StarGraphGrid, apply_hamiltonian, gregory_edge_weights, h1_norm,
                   l2_inner, smooth_gradient)
from .stationary import dphi, phi, profile

RK4_STEP = 0.005
POTENTIAL_FLOOR = 1e-14


class Kind(str, Enum):
    EVEN = "Even"  # u'(0) = 0
    ODD = "Odd"    # u(0) = 0


class Operator(str, Enum):
    PLUS = "Plus"
    MINUS = "Minus"

    @classmethod
    def _missing_(cls, value):
        for member in cls:
            if isinstance(value, str) and member.value.lower() == value.lower():
                return member
        return None


@dataclass(frozen=True)
class ShootingSolution:
    lam: float
    u0: float
    du0: float
    x: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)

    def __call__(self, xs):
        """Evaluate the profile; beyond the integration start the tail is exact."""
        xs = np.asarray(xs, dtype=float)
        kappa = math.sqrt(1.0 - self.lam)
        inside = np.interp(xs, self.x, self.u)
        return np.where(xs <= self.x[-1], inside, np.exp(-kappa * xs))


@dataclass(frozen=True)
class Eigenvalue:
    lam: float
    kind: Kind
    multiplicity: int


@dataclass(frozen=True)
class PointSpectrum:
    p: float
    num_edges: int
    eigenvalues: tuple[Eigenvalue, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "kind", "multiplicity"])
        for e in self.eigenvalues:
            w.writerow([f"{e.lam:.12g}", e.kind.value, e.multiplicity])
        return buf.getvalue()


def potential_depth(p: float) -> float:
    return (2 * p + 1) * (p + 1)


def quiet_point(p: float) -> float:
    """Abscissa beyond which the sech^2 potential is below the floor."""
    depth = potential_depth(p)
    return math.log(4.0 * depth / POTENTIAL_FLOOR) / (2.0 * p)


def _start_point(p: float, x_max: float) -> float:
    xs = min(x_max, quiet_point(p))
    return RK4_STEP * math.ceil(xs / RK4_STEP)


@lru_cache(maxsize=8)
def _potential_table(p: float, x_start: float) -> tuple[np.ndarray, np.ndarray]:
    n = int(round(x_start / RK4_STEP))
    half = np.linspace(0.0, x_start, 2 * n + 1)
    v = potential_depth(p) * np.exp(2.0 * np.log(np.cosh(np.minimum(p * half, 350.0))) * -1.0)
    return half, v


def _shoot_scalar(p: float, lam: float, x_start: float, keep: bool = False):
    """Backward RK4 from x_start to 0 for a single lambda, in plain floats."""
    half, v = _potential_table(p, x_start)
    vl = v.tolist()
    n = (len(vl) - 1) // 2
    h = RK4_STEP
    kappa = math.sqrt(1.0 - lam)
    u = math.exp(-kappa * x_start)
    du = -kappa * u
    c = 1.0 - lam
    us = [u] if keep else None
    for i in range(n, 0, -1):
        # integrate from x_i to x_{i-1}; dx = -h
        q1 = c - vl[2 * i]
        q2 = c - vl[2 * i - 1]
        q3 = c - vl[2 * i - 2]
        k1u, k1v = du, q1 * u
        u2, v2 = u - 0.5 * h * k1u, du - 0.5 * h * k1v
        k2u, k2v = v2, q2 * u2
        u3, v3 = u - 0.5 * h * k2u, du - 0.5 * h * k2v
        k3u, k3v = v3, q2 * u3
        u4, v4 = u - h * k3u, du - h * k3v
        k4u, k4v = v4, q3 * u4
        u -= h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        du -= h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if keep:
            us.append(u)
    if keep:
        return u, du, np.asarray(us[::-1])
    return u, du


def _shoot_many(p: float, lams: np.ndarray, x_start: float):
    """Vectorised backward RK4 for an array of lambdas; returns u(0), u'(0)."""
    half, v = _potential_table(p, x_start)
    n = (len(v) - 1) // 2
    h = RK4_STEP
    c = 1.0 - lams
    kappa = np.sqrt(c)
    u = np.exp(-kappa * x_start)
    du = -kappa * u
    for i in range(n, 0, -1):
        q1 = c - v[2 * i]
        q2 = c - v[2 * i - 1]
        q3 = c - v[2 * i - 2]
        k1u, k1v = du, q1 * u
        k2u = du - 0.5 * h * k1v
        k2v = q2 * (u - 0.5 * h * k1u)
        k3u = du - 0.5 * h * k2v
        k3v = q2 * (u - 0.5 * h * k2u)
        k4u = du - h * k3v
        k4v = q3 * (u - h * k3u)
        u = u - h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        du = du - h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return u, du


def default_x_max(p: float, lam: float) -> float:
    return max(30.0, 40.0 / math.sqrt(1.0 - lam), quiet_point(p))


def solve_decaying(p: float, lam: float, x_max: float | None = None) -> ShootingSolution:
    """Decaying solution normalised by u(x) exp(sqrt(1-lambda) x) -> 1."""
    if not p > 0:
        raise DomainError(f"nonlinearity power must be positive, got {p}")
    if not lam < 1.0 - 1e-6:
        raise DomainError(f"no decaying solution for lambda={lam} >= 1")
    if x_max is None:
        x_max = default_x_max(p, lam)
    xs = _start_point(p, x_max)
    u0, du0, us = _shoot_scalar(p, lam, xs, keep=True)
    x = np.linspace(0.0, xs, len(us))
    return ShootingSolution(lam, u0, du0, x, us)


def _brackets(lams, vals):
    out = []
    s = np.sign(vals)
    for i in range(len(lams) - 1):
        if s[i] == 0:
            out.append((lams[max(i - 1, 0)], lams[i + 1]))
        elif s[i] * s[i + 1] < 0:
            out.append((lams[i], lams[i + 1]))
    return out


@lru_cache(maxsize=16)
def _spectrum_roots(p: float, scan_points: int, tol: float):
    lo = 1.0 - potential_depth(p)
    hi = 1.0 - 1e-4
    lams = np.linspace(lo, hi, scan_points)
    xs = _start_point(p, default_x_max(p, lo))
    u0, du0 = _shoot_many(p, lams, xs)
    roots = []
    for kind, idx in ((Kind.ODD, 0), (Kind.EVEN, 1)):
        vals = u0 if idx == 0 else du0
        for a, b in _brackets(lams, vals):
            fn = lambda lam: _shoot_scalar(p, lam, xs)[idx]
            fa, fb = fn(a), fn(b)
            if fa == 0.0:
                root = a
            elif fb == 0.0:
                root = b
            elif fa * fb > 0:
                continue
            else:
                root = brentq(fn, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
            other = _shoot_scalar(p, root, xs)[1 - idx]
            here = _shoot_scalar(p, root, xs)[idx]
            if abs(here) < 1e-12 and abs(other) < 1e-12:
                raise InconsistencyError(f"u(0) and u'(0) vanish together at lambda={root}")
            roots.append((root, kind))
    roots.sort()
    return tuple(roots)


def find_point_spectrum(p: float, num_edges: int, scan_points: int = 2000,
                        tol: float = 1e-10) -> PointSpectrum:
    if not 0 < p <= 2:
        raise DomainError(f"spectrum scan supports p in (0, 2], got {p}")
    if num_edges < 3:
        raise DomainError(f"star graph needs N >= 3 edges, got {num_edges}")
    roots = _spectrum_roots(float(p), scan_points, tol)
    if not any(k is Kind.ODD and abs(r) < 1e-3 for r, k in roots):
        raise SolverError("the kernel eigenvalue lambda = 0 was not bracketed")
    eig = tuple(Eigenvalue(r, k, num_edges - 1 if k is Kind.ODD else 1) for r, k in roots)
    return PointSpectrum(p, num_edges, eig)


def poschl_teller_eigenvalues(p: float) -> list[tuple[float, Kind]]:
    """Closed-form bound states of the sech^2 well: lambda_n = 1 - (1 + p - n p)^2."""
    out = []
    n = 0
    while 1 + p - n * p > 0:
        out.append((1.0 - (1 + p - n * p) ** 2, Kind.EVEN if n % 2 == 0 else Kind.ODD))
        n += 1
    return out


# -- neutral modes ---------------------------------------------------------------

def edge_vectors(num_edges: int) -> np.ndarray:
    """Rows e_j = (1, ..., 1, -j, 0, ..., 0) with j leading ones, j = 1..N-1."""
    e = np.zeros((num_edges - 1, num_edges))
    for j in range(1, num_edges):
        e[j - 1, :j] = 1.0
        e[j - 1, j] = -float(j)
    return e


@dataclass(frozen=True, eq=False)
class NeutralModeBasis:
    p: float
    omega: float
    vectors: np.ndarray
    modes: tuple[GraphField, ...]
    generalized: tuple[GraphField, ...]
    pairings: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.modes)


def neutral_basis(p: float, num_edges: int, omega: float, grid: StarGraphGrid) -> NeutralModeBasis:
    """Kernel modes of L+ and generalised modes solving L- W = U, continued in omega."""
    if not 0 < p < 2:
        raise DomainError(f"neutral basis requires p in (0, 2), got {p}")
    if not omega > 0:
        raise DomainError(f"frequency must be positive, got {omega}")
    if grid.num_edges != num_edges:
        raise DomainError("grid edge count does not match N")
    vecs = edge_vectors(num_edges)
    rw = math.sqrt(omega)
    u_prof = lambda x: omega ** (0.5 / p + 0.5) * dphi(rw * x, p)
    w_prof = lambda x: -0.5 * omega ** (0.5 / p - 0.5) * (rw * x) * phi(rw * x, p)
    modes = tuple(GraphField.from_profile(grid, u_prof, e) for e in vecs)
    gen = tuple(GraphField.from_profile(grid, w_prof, e) for e in vecs)
    pair = np.array([l2_inner(u, w) for u, w in zip(modes, gen)])
    return NeutralModeBasis(p, omega, vecs, modes, gen, pair)


def apply_l_minus(w: GraphField, p: float, omega: float = 1.0) -> GraphField:
    base = GraphField.from_profile(w.grid, lambda x: profile(x, p, omega))
    return apply_hamiltonian(w) + omega * w - (p + 1) * base ** (2 * p) * w


def apply_l_plus(u: GraphField, p: float, omega: float = 1.0) -> GraphField:
    base = GraphField.from_profile(u.grid, lambda x: profile(x, p, omega))
    return apply_hamiltonian(u) + omega * u - (2 * p + 1) * (p + 1) * base ** (2 * p) * u


def generalized_mode_residual(basis: NeutralModeBasis, j: int) -> float:
    """Max-norm of L-(omega) W^{(j)} - U^{(j)} with the discrete Laplacian (j is 1-based)."""
    w, u = basis.generalized[j - 1], basis.modes[j - 1]
    r = apply_l_minus(w, basis.p, basis.omega) - u
    return float(np.max(np.abs(r.data)))


# -- quadratic forms -------------------------------------------------------------

@dataclass(frozen=True)
class FormValue:
    value: float
    factorized: float | None = None

    def __float__(self):
        return self.value


def quadratic_form(which, v: GraphField, p: float, omega: float = 1.0,
                   order: int = 8) -> FormValue:
    """<L+- v, v> by quadrature of the integrand with high-order derivatives.

    For ``Minus`` the factorised form sum_j int phi^2 |(v_j/phi)'|^2 is also
    evaluated.  The two integrands differ by an exact derivative that is not
    even at the vertex, so both use Gregory end corrections there.  ``Plus``
    keeps the plain trapezoid rule, which is spectrally accurate on the
    kernel modes whose integrands are even at the vertex.
    """
    which = Operator(which)
    g = v.grid
    vr = v.real
    ev = vr.edges()
    dv = smooth_gradient(vr, order)
    base = profile(g.x, p, omega)
    coef = (2 * p + 1) * (p + 1) if which is Operator.PLUS else (p + 1)
    integrand = dv**2 + omega * ev**2 - coef * base ** (2 * p) * ev**2
    if which is Operator.PLUS:
        return FormValue(float(np.sum(integrand * g.edge_weights)))
    wq = gregory_edge_weights(g)
    value = float(np.sum(integrand * wq))
    ratio = GraphField.from_edges(g, ev / base)
    dr = smooth_gradient(ratio, order)
    fact = float(np.sum(base**2 * dr**2 * wq))
    return FormValue(value, fact)


def project_out(v: GraphField, directions) -> GraphField:
    """L2-orthogonal projection of ``v`` onto the complement of span(directions).

    Directions are orthogonalised in the given order (modified Gram-Schmidt).
    """
    basis = []
    for d in directions:
        q = d
        for b in basis:
            q = q - l2_inner(b, q) * b
        nrm = math.sqrt(abs(l2_inner(q, q)))
        if nrm > 0:
            basis.append(q / nrm)
    out = v
    for b in basis:
        out = out - l2_inner(b, out) * b
    return out


def coercivity_ratio(which, v: GraphField, p: float, omega: float = 1.0) -> float:
    """quadratic_form / ||v||_{H1}^2."""
    return quadratic_form(which, v, p, omega).value / h1_norm(v) ** 2
