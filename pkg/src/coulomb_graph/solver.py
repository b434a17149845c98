"""Resolvent problems for the regularized Hamiltonians and their limits.

Regularized operator (Kirchhoff vertex, Dirichlet at the truncation point T):
a vertex-centred three-point scheme.  Each cell carries the exact two-point
stiffness of -y'' + c y with c the cell average of W_eps, so the homogeneous
equation is solved exactly for piecewise-constant short-range terms (this
keeps zero-energy resonances of the core intact).  The spectral parameter
enters through the lumped (trapezoidal) mass, which makes the discrete
operator self-adjoint in the trapezoidal inner product.

Limit operator: on each edge the pair (y, p) with p = y' - q ln(tau) y is
integrated inward from T.  The coefficients have only integrable log
singularities, and p(0+) is the quasi-derivative y^[1](0).  The edge solution
is b_k Y0 + Yf, and the n coefficients b solve A y(0) + B y^[1](0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .coupling import VertexConditions
from .errors import DomainError, NumericalError, StructuralError
from .graph_core import EdgeMesh, GridFunction, geometric_mesh, merge_nodes
from .potentials import CoulombSpec, Profile, RegularizedPotential, eval_Weps

__all__ = [
    "MeshPolicy",
    "QuasiDerivativeData",
    "ResolventProblem",
    "RegularizedSolution",
    "LimitSolution",
    "default_truncation",
    "decay_rate",
    "regularized_meshes",
    "limit_meshes",
    "assemble_regularized",
    "solve_regularized",
    "solve_limit",
    "solve_dirichlet_sum",
    "extract_quasi_derivative",
    "solve",
]


def decay_rate(zeta: complex) -> complex:
    """sqrt(-zeta) on the branch with positive real part."""
    zeta = complex(zeta)
    if zeta.imag == 0:
        raise DomainError("the spectral parameter must be non-real")
    return complex(np.sqrt(-zeta))


def default_truncation(zeta: complex, factor: float = 8.0) -> float:
    return max(2.0, factor / decay_rate(zeta).real)


@dataclass(frozen=True)
class MeshPolicy:
    """Mesh parameters for the regularized solver.

    ``inner_cells`` uniform cells resolve [0, eps]; beyond eps the step grows
    geometrically by ``ratio`` up to ``h_max``.
    """

    inner_cells: int = 40
    ratio: float = 1.01
    h_max: float = 5e-3
    T: float | None = None
    T_factor: float = 8.0

    def __post_init__(self):
        if self.inner_cells < 20:
            raise DomainError("at least 20 cells are required inside the scaled region")
        if self.ratio < 1.0 or self.h_max <= 0:
            raise DomainError("invalid mesh grading")

    def truncation(self, zeta: complex) -> float:
        return self.T if self.T is not None else default_truncation(zeta, self.T_factor)

    def refined(self) -> "MeshPolicy":
        return MeshPolicy(2 * self.inner_cells, float(np.sqrt(self.ratio)), self.h_max / 2, self.T, self.T_factor)


# -- forcing -----------------------------------------------------------------

class _EdgeSource:
    """Right-hand side on one edge as a callable with known break points."""

    def __init__(self, func, breaks, support_end):
        self.func = func
        self.breaks = np.asarray(breaks, dtype=float)
        self.support_end = float(support_end)

    def __call__(self, tau, side="right"):
        return self.func(tau, side)


def _one_sided(prof: Profile, tau, side):
    # true one-sided limits: the right limit at the end of the support is zero
    val = prof(tau, side)
    if side == "right":
        val = np.where(np.asarray(tau) >= prof.support_end, 0.0, val)
    return val


def _sources(f, n: int) -> list:
    if isinstance(f, GridFunction):
        if f.n != n:
            raise StructuralError("forcing has the wrong number of edges")
        out = []
        for mesh, vals in zip(f.meshes, f.values):
            nz = np.nonzero(vals)[0]
            end = mesh.nodes[min(nz[-1] + 1, mesh.size - 1)] if nz.size else 0.0

            def func(tau, side, x=mesh.nodes, v=vals):
                return np.interp(tau, x, v.real, right=0.0) + 1j * np.interp(tau, x, v.imag, right=0.0)

            out.append(_EdgeSource(func, [0.0, end], end))
        return out
    if isinstance(f, Profile):
        f = [f] * n
    f = list(f)
    if len(f) != n:
        raise StructuralError(f"expected {n} forcing profiles, got {len(f)}")
    out = []
    for prof in f:
        if isinstance(prof, (int, float)):
            prof = Profile.constant(float(prof))
        out.append(_EdgeSource(lambda tau, side, p=prof: _one_sided(p, tau, side), prof.breaks, prof.support_end))
    return out


# -- meshes ------------------------------------------------------------------

def regularized_meshes(pot: RegularizedPotential, zeta: complex, policy: MeshPolicy = MeshPolicy(),
                       extra_breaks: Sequence = ()) -> list:
    """Per-edge meshes resolving [0, eps] and grading away from it."""
    T = policy.truncation(zeta)
    eps = pot.epsilon
    h0 = eps / policy.inner_cells
    meshes = []
    for k in range(pot.n):
        br = [pot.breakpoints(k)]
        if len(extra_breaks):
            br.append(np.asarray(extra_breaks[k], dtype=float))
        m = geometric_mesh(k, T, h0, policy.ratio, max(policy.h_max, h0), start=eps,
                           breakpoints=np.concatenate(br))
        meshes.append(m)
    return meshes


def limit_meshes(n: int, T: float, h_min: float = 1e-7, ratio: float = 1.05, h_max: float = 1e-2,
                 extra_breaks: Sequence = ()) -> list:
    """Meshes graded geometrically toward the vertex (log-singular derivatives)."""
    out = []
    for k in range(n):
        br = extra_breaks[k] if len(extra_breaks) else ()
        out.append(geometric_mesh(k, T, h_min, ratio, h_max, breakpoints=br))
    return out


# -- regularized operator ----------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)


def _cell_average_W(pot: RegularizedPotential, k: int, x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
    h = x1 - x0
    eps = pot.epsilon
    out = np.empty(h.shape)
    outer = x0 >= eps * (1 - 1e-12)
    q = pot.coulomb.q[k]
    out[outer] = q * np.log(x1[outer] / x0[outer]) / h[outer]
    inner = ~outer
    if np.any(inner):
        a, b = x0[inner], x1[inner]
        acc = np.zeros(a.shape)
        for xg, wg in zip(_GL_X, _GL_W):
            acc += 0.5 * wg * eval_Weps(pot, k, 0.5 * (b - a) * xg + 0.5 * (b + a))
        out[inner] = acc
    return out


def _cell_stiffness(c: np.ndarray, h: np.ndarray):
    """Exact two-point stiffness (diag, off) of -y'' + c y on a cell of length h."""
    z = c * h * h
    diag = np.empty(h.shape)
    off = np.empty(h.shape)
    small = np.abs(z) < 1e-3
    zs, hs = z[small], h[small]
    diag[small] = (1 + zs / 3 - zs**2 / 45 + 2 * zs**3 / 945) / hs
    off[small] = -(1 - zs / 6 + 7 * zs**2 / 360 - 31 * zs**3 / 15120) / hs
    pos = (~small) & (c > 0)
    if np.any(pos):
        k = np.sqrt(c[pos])
        x = k * h[pos]
        e2 = np.exp(-2 * x)
        diag[pos] = k * (1 + e2) / (1 - e2)
        off[pos] = -k * 2 * np.exp(-x) / (1 - e2)
    neg = (~small) & (c < 0)
    if np.any(neg):
        a = np.sqrt(-c[neg])
        x = a * h[neg]
        if np.any(x >= 0.5 * np.pi):
            raise NumericalError("mesh too coarse for the oscillatory scaled potential")
        diag[neg] = a / np.tan(x)
        off[neg] = -a / np.sin(x)
    return diag, off


@dataclass
class _System:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    mass: np.ndarray
    index: list  # per edge: global index of every node (-1 for the Dirichlet end)
    diag: list
    off: list


def _assemble(pot: RegularizedPotential, zeta: complex, sources, meshes) -> _System:
    n = pot.n
    index = []
    start = 1
    for m in meshes:
        idx = np.empty(m.size, dtype=int)
        idx[0] = 0
        idx[1:-1] = np.arange(start, start + m.size - 2)
        idx[-1] = -1
        start += m.size - 2
        index.append(idx)
    size = start
    rows, cols, vals = [], [], []
    mass = np.zeros(size)
    rhs = np.zeros(size, dtype=complex)
    diags, offs = [], []
    for k, (m, idx, src) in enumerate(zip(meshes, index, sources)):
        x = m.nodes
        h = np.diff(x)
        c = _cell_average_W(pot, k, x[:-1], x[1:])
        d, o = _cell_stiffness(c, h)
        diags.append(d)
        offs.append(o)
        i0, i1 = idx[:-1], idx[1:]
        for a, b, v in ((i0, i0, d), (i1, i1, d), (i0, i1, o), (i1, i0, o)):
            ok = (a >= 0) & (b >= 0)
            rows.append(a[ok])
            cols.append(b[ok])
            vals.append(v[ok])
        half = 0.5 * h
        fr = src(x[:-1], "right")
        fl = src(x[1:], "left")
        ok0 = i0 >= 0
        np.add.at(mass, i0[ok0], half[ok0])
        np.add.at(rhs, i0[ok0], (half * fr)[ok0])
        ok1 = i1 >= 0
        np.add.at(mass, i1[ok1], half[ok1])
        np.add.at(rhs, i1[ok1], (half * fl)[ok1])
    rows.append(np.arange(size))
    cols.append(np.arange(size))
    vals.append(-zeta * mass)
    K = sp.coo_matrix((np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(size, size)).tocsr()
    return _System(K, rhs, mass, index, diags, offs)


def assemble_regularized(pot: RegularizedPotential, zeta: complex, f, meshes) -> _System:
    """Sparse system (K - zeta M) y = b for the given meshes (exposed for oracle checks)."""
    decay_rate(zeta)
    return _assemble(pot, complex(zeta), _sources(f, pot.n), meshes)


@dataclass(frozen=True, eq=False)
class RegularizedSolution:
    y: GridFunction
    residual: float
    T: float
    epsilon: float
    boundary_values: np.ndarray   # y_k(eps)
    boundary_qderivs: np.ndarray  # y_k'(eps) - q_k y_k(eps) ln(eps)


def solve_regularized(pot: RegularizedPotential, zeta: complex, f, policy: MeshPolicy = MeshPolicy(),
                      meshes=None, method: str = "sparse", tol: float = 1e-8) -> RegularizedSolution:
    """Solve (H_eps - zeta) y = f on the truncated graph."""
    zeta = complex(zeta)
    decay_rate(zeta)
    sources = _sources(f, pot.n)
    if meshes is None:
        extra = [s.breaks for s in sources]
        meshes = regularized_meshes(pot, zeta, policy, extra)
    if len(meshes) != pot.n:
        raise StructuralError("one mesh per edge is required")
    system = _assemble(pot, zeta, sources, meshes)
    if method == "sparse":
        sol = spla.spsolve(system.matrix.tocsc(), system.rhs)
    elif method == "dense":
        sol = np.linalg.solve(system.matrix.toarray(), system.rhs)
    else:
        raise DomainError(f"unknown linear solver {method!r}")
    # normwise backward error: cells near the vertex carry entries ~ 1/h, so the
    # residual is compared with |K| |y| + |b| rather than with |b| alone
    scale = spla.norm(system.matrix, np.inf) * np.max(np.abs(sol), initial=0.0) + np.max(np.abs(system.rhs))
    res = float(np.max(np.abs(system.matrix @ sol - system.rhs)) / scale) if scale > 0 else 0.0
    if not np.all(np.isfinite(sol)) or res > tol:
        try:
            cond = np.linalg.cond(system.matrix.toarray()) if system.matrix.shape[0] <= 4000 else float("nan")
        except Exception:  # pragma: no cover
            cond = float("nan")
        raise NumericalError(f"regularized solve failed: residual {res:.3e}, condition estimate {cond:.3e}")
    values = []
    for idx in system.index:
        v = np.zeros(idx.size, dtype=complex)
        v[:-1] = sol[idx[:-1]]
        values.append(v)
    y = GridFunction(tuple(meshes), tuple(values))
    eps = pot.epsilon
    bv = np.empty(pot.n, dtype=complex)
    bq = np.empty(pot.n, dtype=complex)
    for k, (m, v) in enumerate(zip(meshes, values)):
        i = min(int(np.searchsorted(m.nodes, eps * (1 - 1e-12))), m.size - 2)
        bv[k] = v[i]
        # derivative at the left end of the cell [x_i, x_{i+1}] from its exact stiffness
        d, o = system.diag[k][i], system.off[k][i]
        deriv = -(d * v[i] + o * v[i + 1])
        bq[k] = deriv - pot.coulomb.q[k] * v[i] * np.log(m.nodes[i])
    return RegularizedSolution(y, res, meshes[0].T, eps, bv, bq)


# -- limit operator -----------------------------------------------------------

@dataclass(frozen=True)
class QuasiDerivativeData:
    values: np.ndarray
    qderivs: np.ndarray
    fit_window: tuple
    fit_residual: float
    fit_discrepancy: float
    reliable: bool


class _EdgeODE:
    """Inward integration of (y, p) on one edge from T to tau_min."""

    def __init__(self, q: float, zeta: complex, T: float, source=None, tau_min: float = 1e-10,
                 rtol: float = 1e-11, atol: float = 1e-13):
        self.q, self.zeta, self.T, self.tau_min = float(q), complex(zeta), float(T), float(tau_min)
        self.source = source
        q_, z_ = self.q, self.zeta
        if source is None:
            init = np.array([0.0, 1.0], dtype=complex)
            bps = []
        else:
            init = np.zeros(2, dtype=complex)
            bps = [b for b in source.breaks if tau_min < b < T]
        pts = sorted(set([T, tau_min] + bps), reverse=True)
        self.segments = []
        state = init
        for hi, lo in zip(pts[:-1], pts[1:]):
            if source is None:
                def rhs(t, u):
                    lt = np.log(t)
                    yp = u[1] + q_ * lt * u[0]
                    return np.array([yp, -z_ * u[0] - q_ * lt * yp])
            else:
                mid = 0.5 * (hi + lo)
                side = "right" if mid > lo else "left"

                def rhs(t, u, side=side):
                    lt = np.log(t)
                    yp = u[1] + q_ * lt * u[0]
                    return np.array([yp, -z_ * u[0] - source(t, side) - q_ * lt * yp])
            if source is not None and np.all(state == 0) and lo >= source.support_end:
                self.segments.append((lo, hi, None))
                continue
            sol = solve_ivp(rhs, (hi, lo), state, method="DOP853", rtol=rtol, atol=atol, dense_output=True)
            if not sol.success:
                raise NumericalError(f"limit ODE integration failed: {sol.message}")
            self.segments.append((lo, hi, sol.sol))
            state = sol.y[:, -1]
        d = tau_min
        yd, pd = state
        lt = np.log(d)
        fd = complex(source(d, "right")) if source is not None else 0.0
        self.y0 = yd - pd * d - q_ * yd * (d * lt - d)
        self.p0 = (pd + z_ * yd * d + fd * d + q_ * pd * (d * lt - d)
                   + q_ * q_ * yd * (d * lt * lt - 2 * d * lt + 2 * d))

    def __call__(self, tau) -> tuple:
        """(y, p) at the given points; zero beyond T."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        y = np.zeros(tau.shape, dtype=complex)
        p = np.zeros(tau.shape, dtype=complex)
        for lo, hi, dense in self.segments:
            mask = (tau >= lo) & (tau <= hi)
            if dense is not None and np.any(mask):
                u = dense(tau[mask])
                y[mask], p[mask] = u[0], u[1]
        small = tau < self.tau_min
        if np.any(small):
            t = tau[small]
            with np.errstate(divide="ignore", invalid="ignore"):
                tl = np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)
            y[small] = self.y0 + self.p0 * t + self.q * self.y0 * (tl - t)
            p[small] = self.p0
        return y, p


@dataclass(eq=False)
class LimitSolution:
    """Solution of (H - zeta) y = f for vertex conditions A y(0) + B y^[1](0) = 0."""

    coulomb: CoulombSpec
    conditions: VertexConditions
    zeta: complex
    T: float
    b: np.ndarray
    homogeneous: list
    particular: list
    qd: QuasiDerivativeData
    condition_residual: float
    info: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.qd.values

    @property
    def qderivs(self) -> np.ndarray:
        return self.qd.qderivs

    def edge_values(self, k: int, tau) -> np.ndarray:
        y0, _ = self.homogeneous[k](tau)
        yf, _ = self.particular[k](tau)
        out = self.b[k] * y0 + yf
        tau = np.atleast_1d(tau)
        out[tau == 0] = self.qd.values[k]
        return out

    def sample(self, meshes) -> GridFunction:
        if len(meshes) != self.coulomb.n:
            raise StructuralError("one mesh per edge is required")
        return GridFunction(tuple(meshes), tuple(self.edge_values(k, m.nodes) for k, m in enumerate(meshes)))


def _edge_pairs(coulomb: CoulombSpec, zeta: complex, sources, T: float, tau_min: float):
    hom = [_EdgeODE(q, zeta, T, None, tau_min) for q in coulomb.q]
    par = [_EdgeODE(q, zeta, T, s, tau_min) for q, s in zip(coulomb.q, sources)]
    return hom, par


def solve_limit(coulomb: CoulombSpec, conditions: VertexConditions, zeta: complex, f, T: float | None = None,
                fit_window=(1e-5, 1e-2), tau_min: float = 1e-10, cond_max: float = 1e12,
                _pairs=None) -> LimitSolution:
    """Solve -y'' + (q/tau - zeta) y = f with A y(0) + B y^[1](0) = 0 (Dirichlet at T)."""
    zeta = complex(zeta)
    decay_rate(zeta)
    n = coulomb.n
    if conditions.n != n:
        raise StructuralError("vertex conditions and potential disagree on the edge count")
    T = default_truncation(zeta) if T is None else float(T)
    sources = _sources(f, n)
    hom, par = _pairs if _pairs is not None else _edge_pairs(coulomb, zeta, sources, T, tau_min)
    v0 = np.array([h.y0 for h in hom])
    p0 = np.array([h.p0 for h in hom])
    vf = np.array([h.y0 for h in par])
    pf = np.array([h.p0 for h in par])
    A, B = conditions.A, conditions.B
    S = A * v0[None, :] + B * p0[None, :]
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > cond_max:
        raise NumericalError(f"vertex coefficient system is ill-conditioned (cond {cond:.3e})")
    b = np.linalg.solve(S, -(A @ vf + B @ pf))
    values = b * v0 + vf
    qderivs = b * p0 + pf
    # relative to the full boundary data, so B = 0 with phi(a) ~ 0 does not divide roundoff by roundoff
    scale = max((np.linalg.norm(A) + np.linalg.norm(B)) * np.hypot(np.linalg.norm(values), np.linalg.norm(qderivs)), 1e-300)
    cres = conditions.residual(values, qderivs) / scale

    # independent check of the quasi-derivatives: fit of sampled y' near the vertex
    lo, hi = fit_window
    tau = np.geomspace(lo, hi, 4000)
    fit_res = 0.0
    disc = 0.0
    for k in range(n):
        y = b[k] * hom[k](tau)[0] + par[k](tau)[0]
        bk, rk = extract_quasi_derivative((tau, y), coulomb.q[k], values[k], fit_window, extra_terms=True)
        fit_res = max(fit_res, rk)
        disc = max(disc, abs(bk - qderivs[k]))
    qscale = max(1.0, float(np.max(np.abs(qderivs))))
    qd = QuasiDerivativeData(values, qderivs, tuple(fit_window), fit_res, disc, bool(disc <= 1e-4 * qscale))
    return LimitSolution(coulomb, conditions, zeta, T, b, hom, par, qd, float(cres),
                         {"coefficient_condition": float(cond)})


def solve_dirichlet_sum(coulomb: CoulombSpec, zeta: complex, f, T: float | None = None, **kw) -> LimitSolution:
    """Decoupled edges with y_k(0) = 0."""
    return solve_limit(coulomb, VertexConditions.dirichlet(coulomb.n), zeta, f, T, **kw)


def extract_quasi_derivative(y, q: float, y0: complex, window=(1e-5, 1e-2), edge: int = 0,
                             extra_terms: bool = False) -> tuple:
    """Fit y'(tau) ~ q y0 ln(tau) + b over the window; returns (b, rms residual).

    ``y`` is a GridFunction (``edge`` selects the edge) or a pair (tau, values).
    Derivatives are second-order differences on the given (graded) nodes.  With
    ``extra_terms`` the model also carries tau and tau*ln(tau) corrections.
    """
    if isinstance(y, GridFunction):
        tau, vals = y.meshes[edge].nodes, y.values[edge]
    else:
        tau, vals = (np.asarray(a) for a in y)
    lo, hi = window
    if lo <= 0 or hi <= lo:
        raise DomainError("fit window must satisfy 0 < tau_min < tau_max")
    sel = (tau >= lo) & (tau <= hi)
    if np.count_nonzero(sel) < 4:
        raise DomainError("fit window contains fewer than 4 nodes")
    t = tau[sel]
    v = np.asarray(vals)[sel].astype(complex)
    dy = np.gradient(v, t, edge_order=2)
    target = dy - q * y0 * np.log(t)
    cols = [np.ones_like(t)]
    if extra_terms:
        cols += [t, t * np.log(t)]
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ coef
    return complex(coef[0]), float(np.sqrt(np.mean(np.abs(resid) ** 2)))


# -- problem dispatch -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ResolventProblem:
    """zeta, f and one of: a RegularizedPotential, (CoulombSpec, VertexConditions), or a CoulombSpec
    (Dirichlet direct sum)."""

    zeta: complex
    f: object
    operator: object

    def __post_init__(self):
        decay_rate(self.zeta)


def solve(problem: ResolventProblem, **kw):
    op = problem.operator
    if isinstance(op, RegularizedPotential):
        return solve_regularized(op, problem.zeta, problem.f, **kw)
    if isinstance(op, tuple) and len(op) == 2:
        return solve_limit(op[0], op[1], problem.zeta, problem.f, **kw)
    if isinstance(op, CoulombSpec):
        return solve_dirichlet_sum(op, problem.zeta, problem.f, **kw)
    raise DomainError("unknown operator descriptor")
