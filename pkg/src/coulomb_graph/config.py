"""Run configuration: one JSON/YAML file fully determines a run."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .coupling import VertexConditions
from .errors import DomainError
from .potentials import CoulombSpec, Profile, ShortRangeSpec
from .solver import MeshPolicy

__all__ = ["Config", "load_config", "parse_complex"]


def parse_complex(v) -> complex:
    """Accepts a number, a [re, im] pair or a string such as "1+2j"."""
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError("complex values are given as [re, im]")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", "").replace("i", "j"))
    return complex(v)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ConstantDesc(_Strict):
    type: Literal["constant"]
    value: float
    start: float = 0.0
    end: float = 1.0


class PiecewiseConstantDesc(_Strict):
    type: Literal["piecewise_constant"]
    breaks: list[float]
    values: list[float]


class PiecewisePolynomialDesc(_Strict):
    type: Literal["piecewise_polynomial"]
    breaks: list[float]
    coeffs: list[list[float]]


class TabulatedDesc(_Strict):
    type: Literal["tabulated"]
    tau: list[float] | None = None
    values: list[float] | None = None
    file: str | None = None

    @model_validator(mode="after")
    def _source(self):
        if (self.file is None) == (self.tau is None or self.values is None):
            raise ValueError("tabulated profiles need either 'file' or both 'tau' and 'values'")
        return self


ProfileDesc = Union[float, ConstantDesc, PiecewiseConstantDesc, PiecewisePolynomialDesc, TabulatedDesc]
EdgeField = Union[ProfileDesc, list[ProfileDesc]]


def _profile(desc, base: Path) -> Profile:
    if isinstance(desc, (int, float)):
        return Profile.constant(float(desc))
    if isinstance(desc, ConstantDesc):
        return Profile.constant(desc.value, desc.start, desc.end)
    if isinstance(desc, PiecewiseConstantDesc):
        return Profile.piecewise_constant(desc.breaks, desc.values)
    if isinstance(desc, PiecewisePolynomialDesc):
        return Profile(desc.breaks, desc.coeffs)
    if desc.file is not None:
        path = Path(desc.file)
        return Profile.from_csv(path if path.is_absolute() else base / path)
    return Profile.tabulated(desc.tau, desc.values)


def _edge_profiles(field_value, n: int, base: Path) -> tuple:
    if isinstance(field_value, list):
        if len(field_value) != n:
            raise DomainError(f"expected {n} per-edge profiles, got {len(field_value)}")
        return tuple(_profile(d, base) for d in field_value)
    return tuple(_profile(field_value, base) for _ in range(n))


class GraphCfg(_Strict):
    n: int = Field(ge=2)
    T: float | None = Field(default=None, ge=2.0)


class PotentialCfg(_Strict):
    q: float | list[float] = 0.0
    kappa: EdgeField = 0.0
    U: EdgeField = 0.0
    V: EdgeField = 0.0


class SolverCfg(_Strict):
    zeta: Any = [0.0, 1.0]
    epsilon: float | None = None
    operator: Literal["regularized", "limit", "dirichlet_sum"] = "limit"
    forcing: EdgeField | None = None
    resonance_tol: float = Field(default=1e-9, gt=0)
    inner_cells: int = Field(default=40, ge=20)
    ratio: float = Field(default=1.01, ge=1.0)
    h_max: float = Field(default=5e-3, gt=0)
    T_factor: float = Field(default=8.0, gt=0)
    fit_window: tuple[float, float] = (1e-5, 1e-2)

    @field_validator("zeta")
    @classmethod
    def _zeta(cls, v):
        z = parse_complex(v)
        if z.imag == 0:
            raise ValueError("zeta must be non-real")
        return [z.real, z.imag]

    @field_validator("epsilon")
    @classmethod
    def _eps(cls, v):
        if v is not None and not (0.0 < v < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")
        return v

    @property
    def zeta_c(self) -> complex:
        return complex(*self.zeta)


class SweepCfg(_Strict):
    scenario: str | None = None
    eps: list[float] | None = None
    zetas: list[Any] | None = None
    expected: Literal["limit", "dirichlet"] = "limit"
    checks: list[str] = []

    @field_validator("eps")
    @classmethod
    def _eps(cls, v):
        if v is None:
            return v
        if any(not (0.0 < e < 1.0) for e in v):
            raise ValueError("every eps must lie in (0, 1)")
        if any(b >= a for a, b in zip(v[:-1], v[1:])):
            raise ValueError("the eps list must be strictly decreasing")
        return v

    @field_validator("zetas")
    @classmethod
    def _zetas(cls, v):
        if v is None:
            return v
        out = []
        for z in v:
            z = parse_complex(z)
            if z.imag == 0:
                raise ValueError("every zeta must be non-real")
            out.append([z.real, z.imag])
        return out


class ConditionsCfg(_Strict):
    """User-supplied vertex conditions; entries are reals or [re, im] pairs."""

    A: list[list[Any]]
    B: list[list[Any]]

    def matrices(self) -> tuple:
        A = np.array([[parse_complex(x) for x in row] for row in self.A])
        B = np.array([[parse_complex(x) for x in row] for row in self.B])
        return A, B


class Config(_Strict):
    graph: GraphCfg | None = None
    potentials: PotentialCfg = PotentialCfg()
    solver: SolverCfg = SolverCfg()
    sweep: SweepCfg = SweepCfg()
    conditions: ConditionsCfg | None = None
    output_dir: str | None = None
    seed: int = 0

    _base: Path = Path(".")

    @model_validator(mode="after")
    def _shapes(self):
        n = self.graph.n if self.graph else None
        q = self.potentials.q
        if isinstance(q, list):
            if n is not None and len(q) != n:
                raise ValueError(f"q has {len(q)} entries for n = {n} edges")
        for name in ("kappa", "U", "V"):
            val = getattr(self.potentials, name)
            if isinstance(val, list) and n is not None and len(val) != n:
                raise ValueError(f"{name} has {len(val)} profiles for n = {n} edges")
        if self.conditions is not None and n is not None:
            A, B = self.conditions.matrices()
            if A.shape != (n, n) or B.shape != (n, n):
                raise ValueError("conditions A and B must be n x n")
        return self

    # -- builders -----------------------------------------------------------
    def require_graph(self) -> int:
        if self.graph is None:
            raise DomainError("the configuration needs a 'graph' section")
        return self.graph.n

    def coulomb(self) -> CoulombSpec:
        n = self.require_graph()
        q = self.potentials.q
        return CoulombSpec(q if isinstance(q, list) else [q] * n)

    def short_range(self) -> ShortRangeSpec:
        n = self.require_graph()
        p = self.potentials
        return ShortRangeSpec(*(_edge_profiles(getattr(p, name), n, self._base) for name in ("kappa", "U", "V")))

    def forcing(self) -> tuple:
        n = self.require_graph()
        if self.solver.forcing is None:
            from .experiments import default_forcing

            return default_forcing(n)
        return _edge_profiles(self.solver.forcing, n, self._base)

    def policy(self) -> MeshPolicy:
        s = self.solver
        return MeshPolicy(s.inner_cells, s.ratio, s.h_max, self.graph.T if self.graph else None, s.T_factor)

    def user_conditions(self) -> VertexConditions | None:
        if self.conditions is None:
            return None
        A, B = self.conditions.matrices()
        return VertexConditions(A, B, "generic")


def load_config(path) -> Config:
    """Parse a JSON or YAML file (YAML is a superset of JSON)."""
    path = Path(path)
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ValueError(f"cannot parse {path.name}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValueError("configuration must be a mapping")
    cfg = Config.model_validate(data)
    cfg._base = path.parent
    return cfg
