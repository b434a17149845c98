"""Limit vertex couplings built from the half-bound states.

Given a resonance basis with boundary-value matrix L, the limit domain is

    phi(a) in R_V = ran L,        M L^+ phi(a) - L^* phi^[1](a) = 0,

which is written as A phi(a) + B phi^[1](a) = 0 with A = [R^*; M L^+] and
B = [0; -L^*], R spanning the orthogonal complement of R_V.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space, subspace_angles

from .errors import DomainError, InconsistencyError
from .potentials import CoulombSpec, ShortRangeSpec
from .resonance import ResonanceData, core_quadrature

__all__ = [
    "CouplingMatrices",
    "VertexConditions",
    "ConvergenceCheck",
    "InvarianceReport",
    "DecompositionReport",
    "build_matrices",
    "check_convergence_condition",
    "assemble_vertex_conditions",
    "check_self_adjoint",
    "condition_subspace",
    "max_principal_angle",
    "symplectic_form",
    "basis_change_invariance_check",
    "decompose",
    "exner_manko_conditions",
    "describe_conditions",
]

KINDS = ("generic", "delta", "scale_invariant", "coulomb_quasi", "dirichlet_sum")


@dataclass(frozen=True, eq=False)
class CouplingMatrices:
    M: np.ndarray
    N: np.ndarray
    K: np.ndarray
    L: np.ndarray
    Lplus: np.ndarray
    R: np.ndarray
    # per-edge integrals of U * shot_k**2 and kappa * shot_k**2 (basis independent)
    u_weights: np.ndarray = field(repr=False)
    kappa_weights: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def r(self) -> int:
        return self.L.shape[1]


def _weighted_shot_integrals(res: ResonanceData, profiles) -> np.ndarray:
    out = np.empty(res.n)
    for k, (shot, prof) in enumerate(zip(res.shots, profiles)):
        x, w = core_quadrature(np.union1d(shot.breaks, np.clip(prof.breaks, 0, 1)))
        out[k] = np.sum(w * prof(x) * shot(x)[0] ** 2)
    return out


def _pinv_left(L: np.ndarray) -> np.ndarray:
    LH = L.conj().T
    G = LH @ L
    if np.linalg.cond(G) > 1e14:
        raise InconsistencyError("L*L is singular; the boundary-value map is not injective")
    return np.linalg.solve(G, LH)


def _complement(L: np.ndarray) -> np.ndarray:
    n, r = L.shape
    if r == 0:
        return np.eye(n)
    U, _, _ = np.linalg.svd(L)
    return U[:, r:]


def _from_weights(L, uw, kw, q) -> CouplingMatrices:
    LH = L.conj().T
    M = LH @ (uw[:, None] * L)
    N = LH @ (kw[:, None] * L)
    M = 0.5 * (M + M.conj().T)
    N = 0.5 * (N + N.conj().T)
    Lplus = _pinv_left(L) if L.shape[1] else np.zeros((0, L.shape[0]))
    return CouplingMatrices(M, N, np.diag(np.asarray(q, dtype=float)), L, Lplus, _complement(L), uw, kw)


def build_matrices(res: ResonanceData, short_range: ShortRangeSpec, coulomb) -> CouplingMatrices:
    """M, N (U- and kappa-weighted Gram matrices), K = diag(q), L, L^+ and R."""
    q = coulomb.q if isinstance(coulomb, CoulombSpec) else np.asarray(coulomb, dtype=float)
    if q.size != res.n or short_range.n != res.n:
        raise DomainError("edge counts of resonance data and potentials disagree")
    uw = _weighted_shot_integrals(res, short_range.U)
    kw = _weighted_shot_integrals(res, short_range.kappa)
    return _from_weights(res.L, uw, kw, q)


def rebase_matrices(cm: CouplingMatrices, X) -> CouplingMatrices:
    """Matrices recomputed for the basis psi_hat = psi X."""
    return _from_weights(cm.L @ np.asarray(X), cm.u_weights, cm.kappa_weights, np.diag(cm.K))


@dataclass(frozen=True)
class ConvergenceCheck:
    holds: bool
    residual: float
    scale: float
    matrix: np.ndarray

    def __bool__(self):
        return self.holds


def check_convergence_condition(cm: CouplingMatrices, tol: float = 1e-8) -> ConvergenceCheck:
    """Whether R_V lies in ker(N L^+ - L^* K).

    Since the columns of L span R_V this is ``(N L^+ - L^* K) L = 0``.  The
    residual is compared with ``tol * max(1, |N L^+|, |L^* K|)``.
    """
    if cm.r == 0:
        return ConvergenceCheck(True, 0.0, 1.0, np.zeros((0, 0)))
    P = cm.N @ cm.Lplus - cm.L.conj().T @ cm.K
    mat = P @ cm.L
    residual = float(np.linalg.norm(mat, 2))
    scale = max(1.0, float(np.linalg.norm(cm.N @ cm.Lplus, 2)), float(np.linalg.norm(cm.L.conj().T @ cm.K, 2)))
    return ConvergenceCheck(residual <= tol * scale, residual, scale, mat)


@dataclass(frozen=True, eq=False)
class VertexConditions:
    """A phi(a) + B phi^[1](a) = 0."""

    A: np.ndarray
    B: np.ndarray
    kind: str = "generic"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        B = np.atleast_2d(np.asarray(self.B, dtype=complex))
        if A.shape != B.shape or A.shape[0] != A.shape[1]:
            raise DomainError("A and B must be square matrices of equal size")
        if self.kind not in KINDS:
            raise DomainError(f"unknown coupling kind {self.kind!r}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @classmethod
    def dirichlet(cls, n: int) -> "VertexConditions":
        return cls(np.eye(n), np.zeros((n, n)), "dirichlet_sum")

    @classmethod
    def kirchhoff(cls, n: int, strength: float = 0.0) -> "VertexConditions":
        """Continuity plus sum_k phi_k^[1](a) = strength * phi_1(a)."""
        A = np.zeros((n, n))
        B = np.zeros((n, n))
        for i in range(n - 1):
            A[i, i], A[i, i + 1] = 1.0, -1.0
        A[n - 1, :] = strength / n
        B[n - 1, :] = -1.0
        return cls(A, B, "delta")

    def residual(self, values, qderivs) -> float:
        return float(np.linalg.norm(self.A @ np.asarray(values) + self.B @ np.asarray(qderivs)))


def assemble_vertex_conditions(cm: CouplingMatrices, tol: float = 1e-12) -> VertexConditions:
    n, r = cm.n, cm.r
    A = np.vstack([cm.R.conj().T, cm.M @ cm.Lplus])
    B = np.vstack([np.zeros((n - r, n)), -cm.L.conj().T])
    if r == 0:
        kind = "dirichlet_sum"
    elif np.linalg.norm(cm.M) <= tol:
        kind = "scale_invariant"
    elif r == 1 and np.ptp(cm.L[:, 0].real) <= 1e-9 * np.max(np.abs(cm.L)) and not np.any(cm.L.imag):
        kind = "coulomb_quasi" if np.any(np.diag(cm.K)) else "delta"
    else:
        kind = "generic"
    return VertexConditions(A, B, kind)


def check_self_adjoint(vc: VertexConditions, tol: float = 1e-10) -> bool:
    """rank (A B) = n and A B^* Hermitian."""
    AB = np.hstack([vc.A, vc.B])
    sv = np.linalg.svd(AB, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= tol * sv[0]:
        return False
    herm = vc.A @ vc.B.conj().T
    return bool(np.linalg.norm(herm - herm.conj().T, 2) <= tol)


def condition_subspace(vc: VertexConditions) -> np.ndarray:
    """Orthonormal basis (2n x dim) of {(x, y): A x + B y = 0}."""
    return null_space(np.hstack([vc.A, vc.B]))


def max_principal_angle(S1: np.ndarray, S2: np.ndarray) -> float:
    if S1.shape[1] != S2.shape[1]:
        return float(np.pi / 2)
    if S1.shape[1] == 0:
        return 0.0
    return float(np.max(subspace_angles(S1, S2)))


def symplectic_form(x: np.ndarray, y: np.ndarray) -> complex:
    """omega((phi, phi1), (psi, psi1)) = sum phi conj(psi1) - phi1 conj(psi)."""
    n = x.size // 2
    return complex(np.sum(x[:n] * np.conj(y[n:]) - x[n:] * np.conj(y[:n])))


@dataclass(frozen=True)
class InvarianceReport:
    convergence_verdicts: tuple
    residuals: tuple
    principal_angle: float
    transform_error: float
    ok: bool


def basis_change_invariance_check(res: ResonanceData, short_range: ShortRangeSpec, coulomb,
                                  X, tol: float = 1e-9) -> InvarianceReport:
    """Rebuild everything in the basis psi X and compare with the original."""
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    if X.shape != (res.r, res.r):
        raise DomainError(f"X must be {res.r}x{res.r}")
    if res.r and (np.linalg.matrix_rank(X) < res.r or np.linalg.cond(X) > 1e12):
        raise DomainError("basis change matrix is singular")
    cm = build_matrices(res, short_range, coulomb)
    res_hat = res.rebased(X)
    cm_hat = build_matrices(res_hat, short_range, coulomb)
    c1 = check_convergence_condition(cm)
    c2 = check_convergence_condition(cm_hat)
    angle = max_principal_angle(condition_subspace(assemble_vertex_conditions(cm)),
                                condition_subspace(assemble_vertex_conditions(cm_hat)))
    XH = X.conj().T
    terr = max(
        np.linalg.norm(cm_hat.L - cm.L @ X),
        np.linalg.norm(cm_hat.M - XH @ cm.M @ X),
        np.linalg.norm(cm_hat.N - XH @ cm.N @ X),
    ) if res.r else 0.0
    ok = c1.holds == c2.holds and angle <= tol
    return InvarianceReport((c1.holds, c2.holds), (c1.residual, c2.residual), angle, float(terr), ok)


@dataclass(frozen=True, eq=False)
class ResonantBlock:
    edges: tuple
    basis_columns: tuple
    L: np.ndarray


@dataclass(frozen=True, eq=False)
class DecompositionReport:
    non_resonant_edges: tuple
    blocks: tuple
    rotation: np.ndarray
    exact: bool

    def partition(self) -> list:
        return [set(self.non_resonant_edges)] + [set(b.edges) for b in self.blocks]


def _rref_rows(Lt: np.ndarray, tol: float):
    """Row-reduce an r x n matrix with partial pivoting; returns (G, rref) with rref = G Lt."""
    A = Lt.astype(complex).copy()
    r, n = A.shape
    G = np.eye(r, dtype=complex)
    row = 0
    scale = max(np.max(np.abs(A)), 1e-300) if A.size else 1.0
    for col in range(n):
        if row >= r:
            break
        piv = row + int(np.argmax(np.abs(A[row:, col])))
        if abs(A[piv, col]) <= tol * scale:
            continue
        A[[row, piv]] = A[[piv, row]]
        G[[row, piv]] = G[[piv, row]]
        f = A[row, col]
        A[row] /= f
        G[row] /= f
        for i in range(r):
            if i != row and A[i, col] != 0:
                g = A[i, col]
                A[i] -= g * A[row]
                G[i] -= g * G[row]
        row += 1
    A[np.abs(A) <= tol * scale] = 0.0
    return G, A


def decompose(res: ResonanceData, tol: float = 1e-9) -> DecompositionReport:
    """Split edges into non-resonant ones and blocks carrying independent half-bound states.

    The basis is rotated to reduced row-echelon form (Gaussian elimination with
    pivoting on L^T), then edges are grouped by the connected components of the
    incidence "basis function j is non-zero on edge k".
    """
    n, r = res.n, res.r
    scale = max(float(np.max(np.abs(res.L))), 1e-300) if r else 1.0
    row_norms = np.linalg.norm(res.L, axis=1) if r else np.zeros(n)
    E0 = tuple(int(k) for k in np.nonzero(row_norms <= tol * scale)[0])
    if r == 0:
        return DecompositionReport(tuple(range(n)), (), np.zeros((0, 0)), True)
    G, rref = _rref_rows(res.L.T, tol)
    X = G.T  # L X has columns equal to the rows of rref
    Lrot = res.L @ X
    touch = np.abs(Lrot) > tol * scale
    # union-find on basis functions sharing an edge
    parent = list(range(r))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k in range(n):
        cols = np.nonzero(touch[k])[0]
        for c in cols[1:]:
            parent[find(c)] = find(cols[0])
    groups: dict = {}
    for j in range(r):
        groups.setdefault(find(j), []).append(j)
    blocks = []
    for cols in groups.values():
        edges = tuple(int(k) for k in range(n) if np.any(touch[k, cols]))
        blocks.append(ResonantBlock(edges, tuple(cols), Lrot[np.ix_(edges, cols)]))
    blocks.sort(key=lambda b: b.edges)
    # exactness: entries outside the claimed blocks are at rounding level
    mask = np.zeros_like(touch)
    for b in blocks:
        mask[np.ix_(b.edges, b.basis_columns)] = True
    leak = float(np.max(np.abs(Lrot[~mask]), initial=0.0))
    return DecompositionReport(E0, tuple(blocks), X, leak <= tol * scale)


def exner_manko_conditions(L: np.ndarray, M: np.ndarray) -> VertexConditions:
    """Couplings written for a basis with L = [E; L0] (identity on the first r edges).

    phi_j(a) = sum_i L0[j, i] phi_i(a) for j > r and
    phi'_i(a) + sum_{j>r} L[j, i] phi'_j(a) - sum_j m_ij phi_j(a) = 0 for i <= r.
    """
    n, r = L.shape
    if not np.allclose(L[:r], np.eye(r), atol=1e-10):
        raise DomainError("L must have the identity as its top r x r block")
    A = np.zeros((n, n), dtype=complex)
    B = np.zeros((n, n), dtype=complex)
    for row, j in enumerate(range(r, n)):
        A[row, j] = 1.0
        A[row, :r] = -L[j, :]
    P = np.hstack([np.eye(r), np.zeros((r, n - r))])
    A[n - r:, :] = -(M @ P)
    B[n - r:, :] = L.T
    return VertexConditions(A, B)


def _fmt(z: complex) -> str:
    z = complex(z)
    if abs(z.imag) <= 1e-12 * max(1.0, abs(z.real)):
        return f"{z.real:.6g}"
    return f"({z.real:.6g}{z.imag:+.6g}j)"


def describe_conditions(vc: VertexConditions, tol: float = 1e-12) -> str:
    """Human-readable vertex conditions (edges numbered from 1)."""
    n = vc.n
    if vc.kind == "dirichlet_sum" and np.allclose(vc.B, 0):
        return ("phi_k(a) = 0 for k = 1..%d  (Dirichlet direct sum D_1 + ... + D_%d)" % (n, n))
    lines = []
    if vc.kind in ("delta", "coulomb_quasi"):
        # continuity rows are R^*; strength from the last row
        a_row, b_row = vc.A[-1], vc.B[-1]
        strength = -np.sum(a_row) / np.mean(b_row) if np.any(b_row) else np.nan
        lines.append(" = ".join(f"phi_{k + 1}(a)" for k in range(n)))
        d = "phi^[1]" if vc.kind == "coulomb_quasi" else "phi'"
        lines.append(f"sum_k {d}_k(a) - {_fmt(strength)} * phi_1(a) = 0")
        return "\n".join(lines)
    scale = max(np.max(np.abs(vc.A)), np.max(np.abs(vc.B)), 1e-300)
    for i in range(n):
        terms = []
        for k in range(n):
            if abs(vc.A[i, k]) > tol * scale:
                terms.append(f"{_fmt(vc.A[i, k])}*phi_{k + 1}(a)")
        for k in range(n):
            if abs(vc.B[i, k]) > tol * scale:
                terms.append(f"{_fmt(vc.B[i, k])}*phi^[1]_{k + 1}(a)")
        lines.append((" + ".join(terms) if terms else "0") + " = 0")
    return "\n".join(lines)
