"""Zero-energy resonances of -psi'' + V psi on the star graph.

Half-bound states are constant outside the unit core, so they are found on the
core graph (n unit edges) as solutions of -psi'' + V psi = 0 that are continuous
and Kirchhoff at the centre and have psi' = 0 at every boundary vertex.  Each
edge is shot from its boundary vertex (psi = 1, psi' = 0) to the centre; the
unknown edge amplitudes then solve a small homogeneous linear system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, InconsistencyError, NumericalError
from .graph_core import EdgeMesh, GridFunction, merge_nodes
from .potentials import Profile, ShortRangeSpec, _per_edge

__all__ = [
    "EdgeShot",
    "ResonanceData",
    "shoot_edge",
    "solve_half_bound_states",
    "ell_map",
    "is_injective_ell",
    "core_quadrature",
]

_GAUSS_ORDER = 12


def _propagate_constant(c: float, y0, d0, s):
    """Exact solution of y'' = c y after a displacement s from (y0, d0)."""
    s = np.asarray(s, dtype=float)
    if c > 0:
        k = np.sqrt(c)
        ch, sh = np.cosh(k * s), np.sinh(k * s)
        return y0 * ch + d0 * sh / k, y0 * k * sh + d0 * ch
    if c < 0:
        a = np.sqrt(-c)
        co, si = np.cos(a * s), np.sin(a * s)
        return y0 * co + d0 * si / a, -y0 * a * si + d0 * co
    return y0 + d0 * s, d0 + 0.0 * s


class EdgeShot:
    """Solution of -psi'' + V psi = 0 on [0, 1] with psi(1) = 1, psi'(1) = 0.

    Piecewise-constant pieces are propagated in closed form (cos/cosh);
    other pieces are integrated with an adaptive 8th-order Runge-Kutta method.
    """

    def __init__(self, V: Profile, edge: int = 0, rtol: float = 1e-12):
        self.edge = edge
        self.V = V
        breaks = np.union1d(np.clip(V.breaks, 0.0, 1.0), [0.0, 1.0])
        self.breaks = breaks
        m = breaks.size - 1
        # state at the right end of every piece, filled from t = 1 inward
        self._right_state = [None] * m
        self._kind = [None] * m
        self._dense = [None] * m
        y, d = 1.0, 0.0
        for i in range(m - 1, -1, -1):
            a, b = breaks[i], breaks[i + 1]
            self._right_state[i] = (y, d)
            mid = 0.5 * (a + b)
            piece = V.coeffs[int(np.clip(np.searchsorted(V.breaks, mid) - 1, 0, len(V.coeffs) - 1))]
            inside = V.breaks[0] <= mid <= V.breaks[-1]
            if not inside or np.all(piece[1:] == 0.0):
                c = float(piece[0]) if inside else 0.0
                self._kind[i] = ("const", c)
                y, d = _propagate_constant(c, y, d, a - b)
                y, d = float(y), float(d)
            else:
                sol = solve_ivp(
                    lambda t, u: [u[1], float(V(t)) * u[0]],
                    (b, a), [y, d], method="DOP853", rtol=rtol, atol=1e-14, dense_output=True,
                )
                if not sol.success:
                    raise NumericalError(f"edge {edge}: shooting failed ({sol.message})")
                self._kind[i] = ("ode", None)
                self._dense[i] = sol.sol
                y, d = float(sol.y[0, -1]), float(sol.y[1, -1])
        self.center_value = y
        self.center_derivative = d

    def __call__(self, t):
        """Return (psi(t), psi'(t)) for t in [0, 1]."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any((t < 0) | (t > 1)):
            raise DomainError("core coordinate must lie in [0, 1]")
        idx = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, self.breaks.size - 2)
        val = np.empty(t.shape)
        der = np.empty(t.shape)
        for i in np.unique(idx):
            mask = idx == i
            kind, c = self._kind[i]
            if kind == "const":
                y, d = self._right_state[i]
                val[mask], der[mask] = _propagate_constant(c, y, d, t[mask] - self.breaks[i + 1])
            else:
                u = self._dense[i](t[mask])
                val[mask], der[mask] = u[0], u[1]
        if scalar:
            return float(val[0]), float(der[0])
        return val, der


def shoot_edge(V: Profile, edge: int = 0) -> EdgeShot:
    return EdgeShot(V, edge)


def core_quadrature(breaks: Sequence[float], panels: int = 4, order: int = _GAUSS_ORDER):
    """Composite Gauss-Legendre rule on [0, 1] respecting the given break points."""
    pts = np.union1d(np.clip(np.asarray(breaks, dtype=float), 0.0, 1.0), [0.0, 1.0])
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        edges = np.linspace(a, b, panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
            weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True, eq=False)
class ResonanceData:
    """Half-bound-state basis restricted to the core graph.

    Basis function j equals ``L[k, j] * shots[k](t)`` on core edge k, so the
    columns of ``L`` are the boundary values (= values at infinity).
    """

    n: int
    r: int
    L: np.ndarray
    singular_values: np.ndarray
    shots: tuple
    basis: tuple
    tol: float
    residuals: dict

    def psi(self, j: int, edge: int, t):
        val, _ = self.shots[edge](t)
        return self.L[edge, j] * val

    def edge_gram(self, panels: int = 4) -> np.ndarray:
        """Integrals of shot_k(t)**2 over each core edge."""
        out = np.empty(self.n)
        for k, shot in enumerate(self.shots):
            x, w = core_quadrature(shot.breaks, panels)
            out[k] = np.sum(w * shot(x)[0] ** 2)
        return out

    def rebased(self, X) -> "ResonanceData":
        """Same space, basis transformed by the invertible r x r matrix X."""
        X = np.atleast_2d(np.asarray(X))
        if X.shape != (self.r, self.r):
            raise DomainError(f"basis change must be {self.r}x{self.r}")
        if self.r and np.linalg.cond(X) > 1e12:
            raise DomainError("basis change matrix is singular")
        L = self.L @ X
        return ResonanceData(self.n, self.r, L, self.singular_values, self.shots,
                             _sample_basis(L, self.shots), self.tol, self.residuals)


def _core_mesh(shot: EdgeShot, k: int, nodes: int = 401) -> EdgeMesh:
    return EdgeMesh(k, merge_nodes(np.linspace(0.0, 1.0, nodes), shot.breaks, T=1.0), {"kind": "core"})


def _sample_basis(L: np.ndarray, shots) -> tuple:
    meshes = [_core_mesh(s, k) for k, s in enumerate(shots)]
    samples = [s(m.nodes)[0] for s, m in zip(shots, meshes)]
    return tuple(
        GridFunction(meshes, [L[k, j] * samples[k] for k in range(len(shots))])
        for j in range(L.shape[1])
    )


def _system_matrix(p: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Continuity c_i p_i = c_j p_j (all pairs) and Kirchhoff sum c_k d_k = 0."""
    n = p.size
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            row = np.zeros(n)
            row[i], row[j] = p[i], -p[j]
            rows.append(row)
    rows.append(d.copy())
    return np.array(rows)


def solve_half_bound_states(V, n: int | None = None, tol: float = 1e-9) -> ResonanceData:
    """Basis of the half-bound states of -d^2/dtau^2 + V (orthonormal in L2 of the core).

    ``V`` is a :class:`ShortRangeSpec` (its V component is used), a sequence of
    per-edge profiles, or a scalar/profile shared by all ``n`` edges.  ``tol`` is
    the relative singular-value threshold for the nullspace.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if isinstance(V, ShortRangeSpec):
        profiles = V.V
    else:
        if n is None:
            if isinstance(V, (Profile, int, float)):
                raise DomainError("edge count n is required for a shared potential")
            n = len(V)
        profiles = _per_edge(V, n)
    n = len(profiles)
    if n < 2:
        raise DomainError("a star graph needs n >= 2 edges")
    for k, prof in enumerate(profiles):
        if prof.support_start < 0 or prof.support_end > 1.0 + 1e-14:
            raise DomainError(f"V on edge {k} must be supported in [0, 1]")

    shots = tuple(EdgeShot(prof, k) for k, prof in enumerate(profiles))
    p = np.array([s.center_value for s in shots])
    d = np.array([s.center_derivative for s in shots])
    S = _system_matrix(p, d)
    _, sv, Vh = np.linalg.svd(S)
    smax = sv[0] if sv.size and sv[0] > 0 else 1.0
    rank = int(np.sum(sv > tol * smax))
    r = n - rank
    if r > n - 1:
        raise InconsistencyError(
            f"nullspace dimension {r} exceeds n - 1 = {n - 1}; tol={tol} is too large"
        )
    C = Vh[rank:].T.copy() if r else np.zeros((n, 0))

    if r:
        gram_edges = np.array([np.sum(w * s(x)[0] ** 2) for s in shots for x, w in [core_quadrature(s.breaks)]])
        G = C.T @ (gram_edges[:, None] * C)
        chol = np.linalg.cholesky(G)
        C = np.linalg.solve(chol, C.T).T
        for j in range(r):
            big = np.argmax(np.abs(C[:, j]) > 0.5 * np.max(np.abs(C[:, j])))
            if C[big, j] < 0:
                C[:, j] = -C[:, j]

    residuals = {
        "continuity": float(max((abs(C[i, j] * p[i] - C[k, j] * p[k])
                                 for j in range(r) for i in range(n) for k in range(n)), default=0.0)),
        "kirchhoff": float(np.max(np.abs(d @ C))) if r else 0.0,
    }
    data = ResonanceData(n, r, C, sv, shots, _sample_basis(C, shots), tol, residuals)
    return data


def ell_map(data: ResonanceData, coeffs) -> np.ndarray:
    """Boundary (asymptotic) values of sum_j coeffs[j] psi^(j)."""
    coeffs = np.atleast_1d(np.asarray(coeffs))
    if coeffs.shape != (data.r,):
        raise DomainError(f"expected {data.r} coefficients, got {coeffs.shape}")
    return data.L @ coeffs


def is_injective_ell(data, tol: float = 1e-10) -> bool:
    """Full column rank of L (``data`` is a ResonanceData or the n x r matrix itself)."""
    L = data.L if isinstance(data, ResonanceData) else np.atleast_2d(np.asarray(data))
    if L.shape[1] == 0:
        return True
    sv = np.linalg.svd(L, compute_uv=False)
    return bool(sv[-1] > tol * max(1.0, sv[0]))
