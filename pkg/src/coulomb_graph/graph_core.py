"""Star graphs, edge meshes and sampled functions on them.

Every edge is parametrized by ``tau >= 0`` with the vertex at ``tau = 0``;
derivatives are taken in the direction of increasing ``tau``.  Semi-infinite
edges are truncated at ``T``.  Edge indices are 0-based throughout the Python
API.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, StructuralError

__all__ = [
    "StarGraph",
    "EdgeMesh",
    "GridFunction",
    "uniform_mesh",
    "geometric_mesh",
    "merge_nodes",
    "l2_inner",
    "l2_norm",
    "vertex_values",
]


@dataclass(frozen=True)
class StarGraph:
    n: int
    T: float = 10.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"a star graph needs n >= 2 edges, got {self.n}")
        if not np.isfinite(self.T) or self.T < 2.0:
            raise DomainError(f"truncation length must be >= 2, got {self.T}")


@dataclass(frozen=True, eq=False)
class EdgeMesh:
    """Nodes ``0 = nodes[0] < ... < nodes[-1] = T`` on one edge.

    ``grading`` is descriptive only, e.g. ``{"kind": "uniform"}`` or
    ``{"kind": "geometric", "ratio": 1.01, "h_min": 1e-5}``.
    """

    edge_index: int
    nodes: np.ndarray
    grading: dict = field(default_factory=lambda: {"kind": "uniform"})

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise StructuralError("an edge mesh needs at least two nodes")
        if nodes[0] != 0.0:
            raise StructuralError("edge meshes must start at the vertex (tau = 0)")
        if np.any(np.diff(nodes) <= 0):
            raise StructuralError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def size(self) -> int:
        return self.nodes.size

    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights (equal to the lumped masses)."""
        h = self.steps
        w = np.zeros(self.size)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w

    def same_nodes(self, other: "EdgeMesh") -> bool:
        return self.size == other.size and np.array_equal(self.nodes, other.nodes)

    def bisected(self) -> "EdgeMesh":
        """Mesh with every cell split in half (keeps all original nodes)."""
        mids = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        nodes = np.empty(2 * self.size - 1)
        nodes[0::2] = self.nodes
        nodes[1::2] = mids
        grading = dict(self.grading, bisected=self.grading.get("bisected", 0) + 1)
        return EdgeMesh(self.edge_index, nodes, grading)


def merge_nodes(*arrays: Sequence[float], T: float, min_gap: float = 1e-13) -> np.ndarray:
    """Sorted union of node sets clipped to [0, T]; near-duplicates collapse."""
    pts = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays] + [np.array([0.0, T])])
    pts = np.unique(pts[(pts >= 0.0) & (pts <= T)])
    keep = np.ones(pts.size, dtype=bool)
    last = pts[0]
    for i in range(1, pts.size):
        if pts[i] - last < min_gap * max(1.0, pts[i]):
            keep[i] = False
        else:
            last = pts[i]
    out = pts[keep]
    out[-1] = T
    out[0] = 0.0
    return out


def uniform_mesh(edge_index: int, T: float, h: float, breakpoints: Sequence[float] = ()) -> EdgeMesh:
    if h <= 0:
        raise DomainError("mesh step must be positive")
    m = max(1, int(np.ceil(T / h - 1e-12)))
    nodes = merge_nodes(np.linspace(0.0, T, m + 1), breakpoints, T=T)
    return EdgeMesh(edge_index, nodes, {"kind": "uniform", "h": T / m})


def geometric_mesh(
    edge_index: int,
    T: float,
    h_min: float,
    ratio: float,
    h_max: float,
    start: float = 0.0,
    breakpoints: Sequence[float] = (),
) -> EdgeMesh:
    """Uniform step ``h_min`` on [0, start], then geometric growth to ``h_max``."""
    if not (h_min > 0 and h_max >= h_min and ratio >= 1.0):
        raise DomainError("need 0 < h_min <= h_max and ratio >= 1")
    pts = []
    if start > 0:
        m = max(1, int(np.ceil(start / h_min - 1e-9)))
        pts.append(np.linspace(0.0, start, m + 1))
    x, h = start, h_min
    grow = []
    while x < T:
        grow.append(x)
        x += h
        h = min(h * ratio, h_max)
    pts.append(np.asarray(grow))
    nodes = merge_nodes(*pts, breakpoints, T=T)
    # a final sliver cell next to T is merged into its neighbour
    if nodes.size > 2 and nodes[-1] - nodes[-2] < 0.25 * h_min:
        nodes = np.delete(nodes, -2)
    grading = {"kind": "geometric", "ratio": ratio, "h_min": h_min, "h_max": h_max, "start": start}
    return EdgeMesh(edge_index, nodes, grading)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples of a function on the graph, one array per edge."""

    meshes: tuple
    values: tuple

    def __post_init__(self):
        meshes = tuple(self.meshes)
        if len(meshes) != len(self.values):
            raise StructuralError("one value array per edge mesh is required")
        vals = []
        for mesh, v in zip(meshes, self.values):
            arr = np.array(v, dtype=complex)
            if arr.shape != (mesh.size,):
                raise StructuralError(
                    f"edge {mesh.edge_index}: {arr.size} samples for {mesh.size} nodes"
                )
            arr.setflags(write=False)
            vals.append(arr)
        object.__setattr__(self, "meshes", meshes)
        object.__setattr__(self, "values", tuple(vals))

    @classmethod
    def from_callables(cls, meshes: Sequence[EdgeMesh], funcs: Sequence[Callable]) -> "GridFunction":
        return cls(tuple(meshes), tuple(np.asarray(f(m.nodes)) * np.ones(m.size) for f, m in zip(funcs, meshes)))

    @classmethod
    def zeros(cls, meshes: Sequence[EdgeMesh]) -> "GridFunction":
        return cls(tuple(meshes), tuple(np.zeros(m.size) for m in meshes))

    @property
    def n(self) -> int:
        return len(self.meshes)

    def same_layout(self, other: "GridFunction") -> bool:
        return self.n == other.n and all(a.same_nodes(b) for a, b in zip(self.meshes, other.meshes))

    def _check(self, other: "GridFunction"):
        if not self.same_layout(other):
            raise StructuralError("grid functions live on different meshes")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.meshes, tuple(a + b for a, b in zip(self.values, other.values)))

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.meshes, tuple(a - b for a, b in zip(self.values, other.values)))

    def scale(self, c: complex) -> "GridFunction":
        return GridFunction(self.meshes, tuple(c * v for v in self.values))

    def l2_norm(self) -> float:
        return l2_norm(self)

    def sup_norm(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self.values)

    def edge_sup_norms(self) -> np.ndarray:
        return np.array([np.max(np.abs(v)) for v in self.values])

    def edge_l2_norms(self) -> np.ndarray:
        return np.array([np.sqrt(np.sum(m.weights() * np.abs(v) ** 2)) for m, v in zip(self.meshes, self.values)])


def l2_inner(f: GridFunction, g: GridFunction) -> complex:
    """Trapezoidal approximation of the integral of f * conj(g) over the graph."""
    f._check(g)
    total = 0.0 + 0.0j
    for mesh, a, b in zip(f.meshes, f.values, g.values):
        total += np.sum(mesh.weights() * a * np.conj(b))
    return complex(total)


def l2_norm(f: GridFunction) -> float:
    total = 0.0
    for mesh, a in zip(f.meshes, f.values):
        total += float(np.sum(mesh.weights() * np.abs(a) ** 2))
    return float(np.sqrt(total))


def vertex_values(f: GridFunction) -> np.ndarray:
    """(f_1(0), ..., f_n(0)) read from the first node of every edge."""
    return np.array([v[0] for v in f.values], dtype=complex)
