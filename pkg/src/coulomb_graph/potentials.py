"""Coulomb-type potentials, their cut-off regularization and scaled short-range terms.

On edge ``k`` the regularized family is

    W_eps(tau) = Q_eps(tau) + eps**-2 V_k(tau/eps) + eps**-1 U_k(tau/eps),

with ``Q_eps = q_k / tau`` for ``tau > eps`` and ``(ln eps / eps) kappa_k(tau/eps)``
below.  Short-range shapes are :class:`Profile` objects supported in [0, 1].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, StructuralError

__all__ = [
    "Profile",
    "CoulombSpec",
    "ShortRangeSpec",
    "RegularizedPotential",
    "eval_Q",
    "eval_Qeps",
    "eval_Weps",
    "line_to_graph_q",
]


class Profile:
    """Piecewise-polynomial real function with compact support.

    Piece ``i`` lives on ``[breaks[i], breaks[i+1])`` and is the polynomial
    ``sum_j coeffs[i][j] * (tau - breaks[i])**j``.  Outside
    ``[breaks[0], breaks[-1]]`` the profile is zero; the right end point belongs
    to the last piece.
    """

    def __init__(self, breaks: Sequence[float], coeffs: Sequence[Sequence[float]]):
        breaks = np.asarray(breaks, dtype=float)
        if breaks.ndim != 1 or breaks.size < 2 or np.any(np.diff(breaks) <= 0):
            raise DomainError("profile breaks must be strictly increasing (at least two)")
        if len(coeffs) != breaks.size - 1:
            raise DomainError("one coefficient list per piece is required")
        self.breaks = breaks
        self.coeffs = [np.atleast_1d(np.asarray(c, dtype=float)) for c in coeffs]
        if not all(np.all(np.isfinite(c)) for c in self.coeffs):
            raise DomainError("profile coefficients must be finite")

    # constructors -----------------------------------------------------------
    @classmethod
    def zero(cls) -> "Profile":
        return cls([0.0, 1.0], [[0.0]])

    @classmethod
    def constant(cls, value: float, start: float = 0.0, end: float = 1.0) -> "Profile":
        return cls([start, end], [[value]])

    @classmethod
    def piecewise_constant(cls, breaks: Sequence[float], values: Sequence[float]) -> "Profile":
        return cls(breaks, [[v] for v in values])

    @classmethod
    def tabulated(cls, tau: Sequence[float], values: Sequence[float]) -> "Profile":
        """Linear interpolation through the samples (zero outside their range)."""
        tau = np.asarray(tau, dtype=float)
        values = np.asarray(values, dtype=float)
        if tau.shape != values.shape or tau.size < 2:
            raise DomainError("tabulated profile needs matching tau/value arrays of length >= 2")
        slopes = np.diff(values) / np.diff(tau)
        return cls(tau, [[v, s] for v, s in zip(values[:-1], slopes)])

    @classmethod
    def from_csv(cls, path) -> "Profile":
        """Two-column CSV (tau, value); a non-numeric first row is treated as a header."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise DomainError(f"malformed row in {path}: {row}")
        if not rows:
            raise DomainError(f"no samples in {path}")
        tau, vals = zip(*rows)
        return cls.tabulated(tau, vals)

    # evaluation -------------------------------------------------------------
    def __call__(self, tau, side: str = "right"):
        tau = np.asarray(tau, dtype=float)
        scalar = tau.ndim == 0
        t = np.atleast_1d(tau)
        idx = np.searchsorted(self.breaks, t, side=side) - 1
        # the closing end point belongs to the last piece
        last = self.breaks.size - 2
        if side == "right":
            idx = np.where(t == self.breaks[-1], last, idx)
        else:
            idx = np.where(t == self.breaks[0], -1, idx)
            idx = np.where((idx == last + 1) & (t <= self.breaks[-1]), last, idx)
        out = np.zeros(t.shape)
        for i in range(last + 1):
            mask = idx == i
            if np.any(mask):
                out[mask] = np.polynomial.polynomial.polyval(t[mask] - self.breaks[i], self.coeffs[i])
        return float(out[0]) if scalar else out

    @property
    def support_end(self) -> float:
        return float(self.breaks[-1])

    @property
    def support_start(self) -> float:
        return float(self.breaks[0])

    def is_piecewise_constant(self) -> bool:
        return all(np.all(c[1:] == 0.0) for c in self.coeffs)

    def is_zero(self) -> bool:
        return all(np.all(c == 0.0) for c in self.coeffs)

    def piece_values(self) -> np.ndarray:
        if not self.is_piecewise_constant():
            raise DomainError("profile is not piecewise constant")
        return np.array([c[0] for c in self.coeffs])

    def integral(self) -> float:
        """Exact integral over the support."""
        total = 0.0
        for i, c in enumerate(self.coeffs):
            h = self.breaks[i + 1] - self.breaks[i]
            total += float(sum(cj * h ** (j + 1) / (j + 1) for j, cj in enumerate(c)))
        return total

    def scaled(self, factor: float) -> "Profile":
        return Profile(self.breaks, [factor * c for c in self.coeffs])

    def sup(self) -> float:
        t = np.linspace(self.breaks[0], self.breaks[-1], 257)
        t = np.union1d(t, self.breaks)
        return float(max(np.max(np.abs(self(t, "right"))), np.max(np.abs(self(t, "left")))))

    def to_dict(self) -> dict:
        return {"type": "piecewise_polynomial", "breaks": self.breaks.tolist(),
                "coeffs": [c.tolist() for c in self.coeffs]}

    def __repr__(self):
        if self.is_piecewise_constant():
            return f"Profile.piecewise_constant({self.breaks.tolist()}, {self.piece_values().tolist()})"
        return f"Profile({self.breaks.tolist()}, {[c.tolist() for c in self.coeffs]})"


def _as_profile(x) -> Profile:
    if isinstance(x, Profile):
        return x
    return Profile.constant(float(x))


def _per_edge(x, n: int) -> tuple:
    if isinstance(x, (Profile, int, float)):
        return tuple(_as_profile(x) for _ in range(n))
    items = tuple(_as_profile(v) for v in x)
    if len(items) != n:
        raise StructuralError(f"expected {n} per-edge profiles, got {len(items)}")
    return items


@dataclass(frozen=True, eq=False)
class CoulombSpec:
    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).ravel()
        if not np.all(np.isfinite(q)):
            raise DomainError("Coulomb constants must be finite reals")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.q.size

    @classmethod
    def zero(cls, n: int) -> "CoulombSpec":
        return cls(np.zeros(n))


@dataclass(frozen=True, eq=False)
class ShortRangeSpec:
    """Per-edge shapes kappa, U, V; each must vanish for tau > 1."""

    kappa: tuple
    U: tuple
    V: tuple

    def __post_init__(self):
        n = len(self.V)
        for name in ("kappa", "U", "V"):
            prof = _per_edge(getattr(self, name), n)
            for k, p in enumerate(prof):
                if p.support_start < 0 or p.support_end > 1.0 + 1e-14:
                    raise DomainError(f"{name} on edge {k} must be supported in [0, 1]")
            object.__setattr__(self, name, prof)

    @classmethod
    def uniform(cls, n: int, kappa=0.0, U=0.0, V=0.0) -> "ShortRangeSpec":
        """Build a spec from scalars/profiles (shared by all edges) or per-edge lists."""
        return cls(_per_edge(kappa, n), _per_edge(U, n), _per_edge(V, n))

    @property
    def n(self) -> int:
        return len(self.V)

    def core_breakpoints(self, edge: int) -> np.ndarray:
        pts = [self.kappa[edge].breaks, self.U[edge].breaks, self.V[edge].breaks, [0.0, 1.0]]
        return np.unique(np.clip(np.concatenate(pts), 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class RegularizedPotential:
    coulomb: CoulombSpec
    short_range: ShortRangeSpec
    epsilon: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.coulomb.n != self.short_range.n:
            raise StructuralError("Coulomb and short-range specs disagree on the edge count")

    @property
    def n(self) -> int:
        return self.coulomb.n

    def with_epsilon(self, eps: float) -> "RegularizedPotential":
        return RegularizedPotential(self.coulomb, self.short_range, eps)

    def breakpoints(self, edge: int) -> np.ndarray:
        """Points where W_eps may jump: eps and the scaled profile breaks."""
        return np.union1d(self.epsilon * self.short_range.core_breakpoints(edge), [self.epsilon])


def _check_eps(eps: float):
    if not (0.0 < eps < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {eps}")


def eval_Q(spec: CoulombSpec, edge: int, tau):
    """q_k / tau; undefined at the vertex."""
    t = np.asarray(tau, dtype=float)
    if np.any(t <= 0):
        raise DomainError("the Coulomb potential is not defined at tau = 0")
    out = spec.q[edge] / t
    return float(out) if out.ndim == 0 else out


def eval_Qeps(spec: CoulombSpec, kappa: Profile, eps: float, edge: int, tau, side: str = "right"):
    """Cut-off Coulomb potential; the point tau = eps takes the Coulomb branch."""
    _check_eps(eps)
    t = np.asarray(tau, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    if np.any(t < 0):
        raise DomainError("tau must be non-negative")
    inner = t < eps if side == "right" else t <= eps
    out = np.empty(t.shape)
    out[~inner] = spec.q[edge] / t[~inner]
    out[inner] = (np.log(eps) / eps) * kappa(t[inner] / eps, side)
    return float(out[0]) if scalar else out


def eval_Weps(p: RegularizedPotential, edge: int, tau, side: str = "right"):
    eps = p.epsilon
    sr = p.short_range
    t = np.asarray(tau, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    s = t / eps
    out = eval_Qeps(p.coulomb, sr.kappa[edge], eps, edge, t, side)
    out = out + sr.V[edge](s, side) / eps**2 + sr.U[edge](s, side) / eps
    return float(out[0]) if scalar else out


def line_to_graph_q(q_left: float, q_right: float) -> np.ndarray:
    """Map Q(x) = q_left/x (x < 0), q_right/x (x > 0) on the line to graph constants.

    Edge 1 is the negative half-line with tau = -x, so q_left/x = -q_left/tau.
    """
    return np.array([-q_left, q_right], dtype=float)


def profiles_breakpoints(profiles: Iterable[Profile]) -> np.ndarray:
    pts = [p.breaks for p in profiles]
    return np.unique(np.concatenate(pts)) if pts else np.array([])
