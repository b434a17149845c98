"""Epsilon sweeps comparing regularized resolvents with their limits.

For every (zeta, eps) cell the regularized problem is solved on its own mesh.
The limit and Dirichlet-sum solutions are computed once per zeta and
evaluated exactly on that mesh, so the errors are discrete L2 norms on the
finite-difference mesh itself.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from .coupling import (
    VertexConditions,
    assemble_vertex_conditions,
    build_matrices,
    check_convergence_condition,
    check_self_adjoint,
    decompose,
    exner_manko_conditions,
    max_principal_angle,
    condition_subspace,
)
from .errors import CoulombGraphError, DomainError
from .graph_core import GridFunction, l2_norm
from .potentials import CoulombSpec, Profile, RegularizedPotential, ShortRangeSpec, line_to_graph_q
from .resonance import EdgeShot, solve_half_bound_states
from .solver import MeshPolicy, decay_rate, solve_dirichlet_sum, solve_limit, solve_regularized

__all__ = [
    "SweepSpec",
    "EpsRecord",
    "RateFit",
    "ZetaReport",
    "ConvergenceReport",
    "fit_rate",
    "run_sweep",
    "scenario_library",
    "get_scenario",
    "default_forcing",
    "manko_check",
    "random_scenario",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("eps", "zeta_re", "zeta_im", "err_vs_limit", "err_vs_dirichlet", "mesh_h", "T")

OUTCOMES = ("converges-to-H", "converges-to-Dirichlet-sum", "inconclusive")


def default_forcing(n: int) -> tuple:
    """Piecewise-constant forcing 1 + k/2 on [0, 1] of edge k (distinct on every edge)."""
    return tuple(Profile.constant(1.0 + 0.5 * k) for k in range(n))


@dataclass(frozen=True, eq=False)
class SweepSpec:
    scenario_id: str
    coulomb: CoulombSpec
    short_range: ShortRangeSpec
    eps: tuple = tuple(2.0 ** -j for j in range(4, 11))
    zetas: tuple = (1j,)
    forcing: tuple | None = None
    policy: MeshPolicy = MeshPolicy()
    expected: str = "limit"  # "limit" or "dirichlet"
    description: str = ""
    source: str = ""
    conditions: VertexConditions | None = None
    checks: tuple = ()
    output: str | None = None

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        if len(eps) < 2 or any(not (0.0 < e < 1.0) for e in eps):
            raise DomainError("every eps must lie in (0, 1)")
        if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
            raise DomainError("the eps list must be strictly decreasing")
        object.__setattr__(self, "eps", eps)
        zetas = tuple(complex(z) for z in self.zetas)
        for z in zetas:
            decay_rate(z)
        object.__setattr__(self, "zetas", zetas)
        if self.coulomb.n != self.short_range.n:
            raise DomainError("Coulomb and short-range specs disagree on the edge count")
        if self.forcing is None:
            object.__setattr__(self, "forcing", default_forcing(self.n))
        if self.expected not in ("limit", "dirichlet"):
            raise DomainError("expected outcome must be 'limit' or 'dirichlet'")

    @property
    def n(self) -> int:
        return self.coulomb.n

    def with_(self, **kw) -> "SweepSpec":
        return replace(self, **kw)


@dataclass(frozen=True)
class RateFit:
    p: float
    width: float
    points: int
    inconclusive: bool
    intercept: float = float("nan")


def fit_rate(errors: Sequence, floor: float = 0.0, min_points: int = 4) -> RateFit:
    """Slope of log e against log eps over points with e > 10 * floor.

    ``width`` is the half-width of a 95% confidence interval for the slope.
    """
    pts = [(float(e), float(v)) for e, v in errors if v > 10.0 * floor and v > 0]
    if len(pts) < min_points:
        return RateFit(float("nan"), float("nan"), len(pts), True)
    x = np.log([e for e, _ in pts])
    y = np.log([v for _, v in pts])
    lr = stats.linregress(x, y)
    width = float(lr.stderr * stats.t.ppf(0.975, len(pts) - 2)) if len(pts) > 2 else float("inf")
    return RateFit(float(lr.slope), width, len(pts), False, float(np.exp(lr.intercept)))


def _log_intercept(eps: np.ndarray, err: np.ndarray) -> float:
    """Intercept a of the fit e ~ a + b / |ln eps| (the extrapolated eps -> 0 error)."""
    X = np.column_stack([np.ones_like(eps), 1.0 / np.abs(np.log(eps))])
    coef, *_ = np.linalg.lstsq(X, err, rcond=None)
    return float(coef[0])


def _decays(eps: np.ndarray, err: np.ndarray, tail: int = 4) -> tuple:
    """Monotone decreasing tail and an extrapolated error consistent with zero."""
    t = err[-min(tail, err.size):]
    mono = bool(np.all(np.diff(t) < 0))
    a = _log_intercept(eps, err)
    return mono and a <= 0.1 * float(np.max(err)) and err[-1] < err[0], mono, a


@dataclass(frozen=True, eq=False)
class EpsRecord:
    eps: float
    zeta: complex
    err_vs_limit: float
    err_vs_dirichlet: float
    mesh_h: float
    T: float
    nodes: int
    vertex_values: np.ndarray
    condition_residual: float

    def row(self) -> list:
        z = self.zeta
        return [self.eps, z.real, z.imag, self.err_vs_limit, self.err_vs_dirichlet, self.mesh_h, self.T]


@dataclass(eq=False)
class ZetaReport:
    zeta: complex
    records: list
    floor: float
    rate_limit: RateFit
    rate_dirichlet: RateFit
    limit_decays: bool
    dirichlet_decays: bool
    limit_tail_monotone: bool
    limit_intercept: float
    dirichlet_intercept: float
    bound_constant: float
    bound_holds: bool
    outcome: str
    limit_values: np.ndarray
    limit_qderivs: np.ndarray
    qd_reliable: bool
    qd_fit_residual: float

    @property
    def eps(self) -> np.ndarray:
        return np.array([r.eps for r in self.records])

    @property
    def err_limit(self) -> np.ndarray:
        return np.array([r.err_vs_limit for r in self.records])

    @property
    def err_dirichlet(self) -> np.ndarray:
        return np.array([r.err_vs_dirichlet for r in self.records])

    @property
    def vertex_sup(self) -> np.ndarray:
        return np.array([np.max(np.abs(r.vertex_values)) for r in self.records])

    @property
    def condition_residuals(self) -> np.ndarray:
        return np.array([r.condition_residual for r in self.records])


@dataclass(eq=False)
class ConvergenceReport:
    scenario_id: str
    expected: str
    convergence_condition: bool
    kind: str
    zetas: list
    checks: dict = field(default_factory=dict)
    passed: bool = False

    @property
    def outcome(self) -> str:
        outs = {z.outcome for z in self.zetas}
        return outs.pop() if len(outs) == 1 else "inconclusive"

    def rows(self) -> list:
        return [r.row() for z in self.zetas for r in z.records]

    def summary(self) -> dict:
        def num(x):
            x = float(x)
            return None if not math.isfinite(x) else x

        return {
            "scenario": self.scenario_id,
            "expected": self.expected,
            "convergence_condition": self.convergence_condition,
            "kind": self.kind,
            "outcome": self.outcome,
            "passed": self.passed,
            "checks": self.checks,
            "zetas": [
                {
                    "zeta": [z.zeta.real, z.zeta.imag],
                    "outcome": z.outcome,
                    "rate_limit": num(z.rate_limit.p),
                    "rate_limit_width": num(z.rate_limit.width),
                    "rate_dirichlet": num(z.rate_dirichlet.p),
                    "rate_dirichlet_width": num(z.rate_dirichlet.width),
                    "floor": num(z.floor),
                    "limit_intercept": num(z.limit_intercept),
                    "dirichlet_intercept": num(z.dirichlet_intercept),
                    "bound_constant": num(z.bound_constant),
                    "bound_holds": z.bound_holds,
                    "vertex_sup": [num(v) for v in z.vertex_sup],
                    "condition_residuals": [num(v) for v in z.condition_residuals],
                    "limit_values": [[v.real, v.imag] for v in z.limit_values],
                    "limit_qderivs": [[v.real, v.imag] for v in z.limit_qderivs],
                    "quasi_derivative_reliable": z.qd_reliable,
                    "quasi_derivative_fit_residual": num(z.qd_fit_residual),
                }
                for z in self.zetas
            ],
        }

    def write(self, outdir) -> tuple:
        """Write <id>.csv and <id>_summary.json into an existing directory."""
        outdir = Path(outdir)
        if not outdir.is_dir():
            raise FileNotFoundError(f"output directory {outdir} does not exist")
        csv_path = outdir / f"{self.scenario_id}.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])
        json_path = outdir / f"{self.scenario_id}_summary.json"
        json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


# -- scenario checks --------------------------------------------------------------

def manko_check(theta: np.ndarray, values: np.ndarray, derivs: np.ndarray) -> float:
    """Simple resonance spanned by theta: phi(a) parallel to theta and theta . phi'(a) = 0."""
    theta = np.asarray(theta, dtype=float)
    k = int(np.argmax(np.abs(theta)))
    c = values[k] / theta[k]
    ratio = float(np.max(np.abs(values - c * theta)))
    kirch = abs(complex(theta @ derivs))
    scale = max(1.0, float(np.max(np.abs(values))), float(np.max(np.abs(derivs))))
    return max(ratio, kirch) / scale


def _resonant_projection_check(L: np.ndarray, values: np.ndarray, derivs: np.ndarray) -> float:
    """phi(a) in the column span of L and phi'(a) orthogonal to it."""
    Q, _ = np.linalg.qr(L)
    off = values - Q @ (Q.conj().T @ values)
    along = Q.conj().T @ derivs
    scale = max(1.0, float(np.max(np.abs(values))), float(np.max(np.abs(derivs))))
    return float(max(np.max(np.abs(off)), np.max(np.abs(along)))) / scale


def _block_leak(spec: SweepSpec, vc: VertexConditions, blocks: list, zeta: complex) -> float:
    """Largest response on one part of the partition to forcing supported on another."""
    n = spec.n
    worst = 0.0
    for part in blocks:
        f = [Profile.constant(1.0 + 0.5 * k) if k in part else Profile.zero() for k in range(n)]
        sol = solve_limit(spec.coulomb, vc, zeta, f)
        tau = np.linspace(0.0, sol.T, 401)
        for k in range(n):
            if k not in part:
                worst = max(worst, float(np.max(np.abs(sol.edge_values(k, tau)))))
    return worst


# -- sweep ------------------------------------------------------------------------

def _limit_conditions(spec: SweepSpec):
    res = solve_half_bound_states(spec.short_range)
    cm = build_matrices(res, spec.short_range, spec.coulomb)
    conv = check_convergence_condition(cm)
    vc = spec.conditions if spec.conditions is not None else assemble_vertex_conditions(cm)
    return res, cm, conv, vc


def _eps_cell(spec, zeta, eps, lim, drs, vc, policy):
    pot = RegularizedPotential(spec.coulomb, spec.short_range, eps)
    try:
        sol = solve_regularized(pot, zeta, spec.forcing, policy)
    except CoulombGraphError as exc:
        raise type(exc)(f"eps={eps:.6g}, zeta={zeta}: {exc}") from exc
    meshes = sol.y.meshes
    e_lim = l2_norm(sol.y - lim.sample(meshes))
    e_dir = l2_norm(sol.y - drs.sample(meshes))
    scale = (np.linalg.norm(vc.A) + np.linalg.norm(vc.B)) * \
        np.hypot(np.linalg.norm(sol.boundary_values), np.linalg.norm(sol.boundary_qderivs))
    cres = vc.residual(sol.boundary_values, sol.boundary_qderivs) / max(scale, 1e-300)
    h = min(float(np.min(m.steps)) for m in meshes)
    rec = EpsRecord(eps, zeta, e_lim, e_dir, h, meshes[0].T, sum(m.size for m in meshes),
                    np.array([v[0] for v in sol.y.values]), float(cres))
    return rec, sol


def _floor(spec, zeta, eps, coarse, policy) -> float:
    """Discretization error estimate at one eps from a bisected-mesh solve (second order)."""
    pot = RegularizedPotential(spec.coulomb, spec.short_range, eps)
    fine = solve_regularized(pot, zeta, spec.forcing, meshes=[m.bisected() for m in coarse.y.meshes])
    restricted = GridFunction(coarse.y.meshes, tuple(v[::2] for v in fine.y.values))
    return 4.0 / 3.0 * l2_norm(coarse.y - restricted)


def _zeta_report(spec, zeta, vc, threads) -> ZetaReport:
    policy = spec.policy
    T = policy.truncation(zeta)
    lim = solve_limit(spec.coulomb, vc, zeta, spec.forcing, T=T)
    drs = solve_dirichlet_sum(spec.coulomb, zeta, spec.forcing, T=T)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(lambda e: _eps_cell(spec, zeta, e, lim, drs, vc, policy), spec.eps))
    else:
        cells = [_eps_cell(spec, zeta, e, lim, drs, vc, policy) for e in spec.eps]
    records = [c[0] for c in cells]
    floor = _floor(spec, zeta, spec.eps[-1], cells[-1][1], policy)

    eps = np.array(spec.eps)
    el = np.array([r.err_vs_limit for r in records])
    ed = np.array([r.err_vs_dirichlet for r in records])
    rl = fit_rate(zip(eps, el), floor)
    rd = fit_rate(zip(eps, ed), floor)
    l_ok, l_mono, l_a = _decays(eps, el)
    d_ok, _, d_a = _decays(eps, ed)
    if l_ok:
        outcome = OUTCOMES[0]
    elif d_ok:
        outcome = OUTCOMES[1]
    else:
        outcome = OUTCOMES[2]
    # C eps^(1/4) bound: C from the first two points, checked on the rest
    C = float(np.max(el[:2] / eps[:2] ** 0.25))
    bound = bool(np.all(el[2:] <= C * eps[2:] ** 0.25 * (1 + 1e-12)))
    return ZetaReport(zeta, records, floor, rl, rd, l_ok, d_ok, l_mono, l_a, d_a, C, bound, outcome,
                      lim.values, lim.qderivs, lim.qd.reliable, lim.qd.fit_residual)


def run_sweep(spec: SweepSpec, threads: int = 1, out=None) -> ConvergenceReport:
    """Run an eps sweep for every zeta of the scenario and classify the outcome."""
    res, cm, conv, vc = _limit_conditions(spec)
    if not check_self_adjoint(vc):
        raise DomainError(f"{spec.scenario_id}: limit vertex conditions are not self-adjoint")
    zetas = [_zeta_report(spec, z, vc, threads) for z in spec.zetas]
    report = ConvergenceReport(spec.scenario_id, spec.expected, bool(conv.holds), vc.kind, zetas)

    checks = {}
    z0 = zetas[0]
    for name in spec.checks:
        if name == "manko":
            theta = res.L[:, 0] / res.L[np.argmax(np.abs(res.L[:, 0])), 0]
            checks[name] = manko_check(theta, z0.limit_values, z0.limit_qderivs)
        elif name == "resonant_projection":
            checks[name] = _resonant_projection_check(res.L, z0.limit_values, z0.limit_qderivs)
        elif name == "vertex_to_zero":
            v = z0.vertex_sup
            checks[name] = {"first": float(v[0]), "last": float(v[-1]),
                            "monotone": bool(np.all(np.diff(v) < 0))}
        elif name == "condition_residual":
            c = z0.condition_residuals
            checks[name] = {"first": float(c[0]), "last": float(c[-1]),
                            "monotone": bool(np.all(np.diff(c) < 0))}
        elif name == "exner_manko":
            X = np.linalg.inv(res.L[: res.r])
            cm2 = build_matrices(res.rebased(X), spec.short_range, spec.coulomb)
            em = exner_manko_conditions(cm2.L, cm2.M)
            checks[name] = max_principal_angle(condition_subspace(em), condition_subspace(vc))
        elif name == "line_jump":
            # continuity and sum of outgoing quasi-derivatives = phi(0) times the integral of U
            m = sum(p.integral() for p in spec.short_range.U)
            val, qd = z0.limit_values, z0.limit_qderivs
            checks[name] = float(max(abs(val[0] - val[1]), abs(qd.sum() - m * val[0])))
        elif name == "block_diagonal":
            dec = decompose(res)
            parts = dec.partition()
            checks[name] = {"partition": [sorted(int(k) for k in p) for p in parts],
                            "leak": _block_leak(spec, vc, parts, z0.zeta)}
        else:
            raise DomainError(f"unknown scenario check {name!r}")
    report.checks = checks
    report.passed = _passes(report, spec)
    if out is not None:
        report.write(out)
    return report


def _passes(report: ConvergenceReport, spec: SweepSpec) -> bool:
    ok = True
    for z in report.zetas:
        if spec.expected == "limit":
            ok &= z.outcome == OUTCOMES[0] and z.bound_holds
            ok &= (not z.rate_limit.inconclusive) and z.rate_limit.p >= 0.25
        else:
            ok &= z.outcome == OUTCOMES[1]
    c = report.checks
    if "manko" in c:
        ok &= c["manko"] <= 1e-6
    if "resonant_projection" in c:
        ok &= c["resonant_projection"] <= 1e-6
    if "vertex_to_zero" in c:
        v = c["vertex_to_zero"]
        ok &= v["monotone"] and v["last"] < 0.5 * v["first"]
    if "condition_residual" in c:
        v = c["condition_residual"]
        ok &= v["monotone"] and v["last"] < 0.5 * v["first"]
    if "exner_manko" in c:
        ok &= c["exner_manko"] <= 1e-9
    if "line_jump" in c:
        ok &= c["line_jump"] <= 1e-8
    if "block_diagonal" in c:
        ok &= c["block_diagonal"]["leak"] <= 1e-8
    return bool(ok)


# -- scenarios ----------------------------------------------------------------------

_PI2_4 = np.pi**2 / 4


def _simple_resonance_a3() -> float:
    """a with a tan a = -2 tan 1 on (pi/2, pi): one cos-well edge tuned to a simple resonance."""
    return brentq(lambda a: a * np.tan(a) + 2 * np.tan(1.0), np.pi / 2 + 1e-9, np.pi - 1e-9)


def scenario_library() -> list:
    """Canonical scenarios for the coupling families covered by the theory."""
    n3 = 3
    zero3 = CoulombSpec.zero(n3)
    a3 = _simple_resonance_a3()
    lam = 0.5
    Vd = [Profile.constant(-_PI2_4)] * 3
    return [
        SweepSpec("a_delta", zero3, ShortRangeSpec.uniform(n3, U=1.0),
                  description="delta coupling from a scaled U (no resonance-producing V)",
                  source="delta coupling corollary", checks=("condition_residual",)),
        SweepSpec("b_delta_prime_resonant", zero3, ShortRangeSpec.uniform(n3, V=-_PI2_4),
                  description="resonant delta-prime, V = -pi^2/4 on every edge (double resonance)",
                  source="delta-prime corollary", checks=("resonant_projection",)),
        SweepSpec("b2_delta_prime_simple", zero3,
                  ShortRangeSpec.uniform(n3, V=[Profile.constant(-1.0), Profile.constant(-1.0),
                                                Profile.constant(-a3 * a3)]),
                  description="resonant delta-prime with a simple resonance (ratio conditions)",
                  source="delta-prime corollary, simple resonance", checks=("manko",)),
        SweepSpec("c_delta_prime_nonresonant", zero3, ShortRangeSpec.uniform(n3, V=10.0),
                  description="non-resonant V = 10: Dirichlet decoupling",
                  source="delta-prime corollary, non-resonant case", checks=("vertex_to_zero",)),
        SweepSpec("d_alpha_delta_prime", zero3,
                  ShortRangeSpec.uniform(n3, U=[p.scaled(lam) for p in Vd], V=Vd),
                  description="alpha delta-prime + beta delta with U = lambda V",
                  source="comparison with the Exner-Manko couplings", checks=("exner_manko",)),
        SweepSpec("e_coulomb_delta", CoulombSpec([1.0, 2.0, 3.0]), ShortRangeSpec.uniform(n3, kappa=2.0, U=1.0),
                  description="Coulomb + delta with sum q = integral kappa (6 = 6)",
                  source="Coulomb corollary", checks=("condition_residual",)),
        SweepSpec("f_coulomb_violated", CoulombSpec([1.0, 2.0, 3.0]), ShortRangeSpec.uniform(n3, kappa=0.0, U=1.0),
                  eps=tuple(2.0 ** -j for j in range(4, 17, 2)), expected="dirichlet",
                  description="Coulomb with sum q != integral kappa: Dirichlet decoupling",
                  source="Dirichlet direct-sum theorem", checks=("vertex_to_zero",)),
        SweepSpec("g_block_resonant", CoulombSpec.zero(4),
                  ShortRangeSpec.uniform(4, V=[-_PI2_4, -_PI2_4, 10.0, 10.0]),
                  description="resonance confined to edges 1, 2; edges 3, 4 decouple",
                  source="resonant decomposition theorem", checks=("block_diagonal",)),
        SweepSpec("h_line_coulomb", CoulombSpec(line_to_graph_q(-1.0, 2.0)),
                  ShortRangeSpec.uniform(2, kappa=1.5, U=1.0),
                  description="line with Coulomb tails q_left = -1, q_right = 2 and matching kappa",
                  source="line point interaction with Coulomb tails", checks=("line_jump",)),
        SweepSpec("i_line_cutoff", CoulombSpec(line_to_graph_q(-1.0, 1.0)), ShortRangeSpec.uniform(2),
                  eps=tuple(2.0 ** -j for j in range(4, 17, 2)), expected="dirichlet",
                  description="plain cut-off of alpha/|x| on the line: trivial (decoupled) limit",
                  source="line cut-off family", checks=("vertex_to_zero",)),
    ]


def get_scenario(scenario_id: str) -> SweepSpec:
    for s in scenario_library():
        if s.scenario_id == scenario_id or s.scenario_id.split("_")[0] == scenario_id:
            return s
    raise DomainError(f"unknown scenario {scenario_id!r}")


# -- random scenarios -------------------------------------------------------------------

def _random_pc(rng, lo, hi, max_pieces=3) -> Profile:
    m = int(rng.integers(1, max_pieces + 1))
    inner = np.sort(rng.uniform(0.1, 0.9, m - 1))
    breaks = np.concatenate([[0.0], inner, [1.0]])
    if np.any(np.diff(breaks) < 0.05):
        breaks = np.linspace(0.0, 1.0, m + 1)
    return Profile.piecewise_constant(breaks, rng.uniform(lo, hi, m))


def _tune_last_edge(V: list) -> list:
    """Replace the last edge's V by a constant making the core graph resonant (r >= 1)."""
    s = 0.0
    for k, prof in enumerate(V[:-1]):
        shot = EdgeShot(prof, k)
        if abs(shot.center_value) < 1e-6:
            return V
        s += shot.center_derivative / shot.center_value

    def g(v):
        if v < 0:
            a = np.sqrt(-v)
            return a * np.tan(a) + s
        a = np.sqrt(v)
        return -a * np.tanh(a) + s

    lo, hi = -_PI2_4 + 1e-10, 1.0
    while g(hi) > 0:
        hi *= 2
    return V[:-1] + [Profile.constant(brentq(g, lo, hi, xtol=1e-15, rtol=1e-15))]


def random_scenario(rng, n: int | None = None, mode: str | None = None) -> tuple:
    """Random (CoulombSpec, ShortRangeSpec) with piecewise-constant V, U, kappa and random q.

    ``mode`` is "generic" (almost surely r = 0), "simple" (tuned to r >= 1) or
    "full" (V = -pi^2/4 everywhere, r = n - 1); None draws one at random.
    """
    n = int(rng.integers(2, 6)) if n is None else n
    mode = mode or ["generic", "simple", "full"][int(rng.integers(0, 3))]
    if mode == "full":
        V = [Profile.constant(-_PI2_4)] * n
    else:
        V = [_random_pc(rng, -2.0, 3.0) for _ in range(n)]
        if mode == "simple":
            V = _tune_last_edge(V)
    U = [_random_pc(rng, -2.0, 2.0) for _ in range(n)]
    kappa = [_random_pc(rng, -2.0, 2.0) for _ in range(n)]
    q = rng.uniform(-3.0, 3.0, n)
    return CoulombSpec(q), ShortRangeSpec(tuple(kappa), tuple(U), tuple(V))
