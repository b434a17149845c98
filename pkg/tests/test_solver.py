import numpy as np
import pytest

from coulomb_graph.coupling import VertexConditions, assemble_vertex_conditions, build_matrices
from coulomb_graph.errors import DomainError, StructuralError
from coulomb_graph.graph_core import EdgeMesh, GridFunction, geometric_mesh, l2_inner, uniform_mesh
from coulomb_graph.potentials import CoulombSpec, Profile, RegularizedPotential, ShortRangeSpec, line_to_graph_q
from coulomb_graph.resonance import solve_half_bound_states
from coulomb_graph.solver import (
    MeshPolicy,
    ResolventProblem,
    assemble_regularized,
    decay_rate,
    extract_quasi_derivative,
    solve,
    solve_dirichlet_sum,
    solve_limit,
    solve_regularized,
)

ZETA = 1j


def free_line(x, zeta=ZETA):
    """(-d^2/dx^2 - zeta)^{-1} applied to the indicator of [0, 1] on the line."""
    k = np.sqrt(-complex(zeta))
    x = np.asarray(x, dtype=float)
    left = np.exp(k * x) * (1 - np.exp(-k)) / (2 * k * k)
    mid = ((1 - np.exp(-k * x)) + (1 - np.exp(-k * (1 - x)))) / (2 * k * k)
    right = np.exp(-k * x) * (np.exp(k) - 1) / (2 * k * k)
    return np.where(x <= 0, left, np.where(x <= 1, mid, right))


def dirichlet_half_line(x, zeta=ZETA):
    """Same forcing on the half-line with y(0) = 0."""
    k = np.sqrt(-complex(zeta))
    x = np.asarray(x, dtype=float)
    inner = (np.exp(-k * x) * (np.cosh(k * x) - 1) + np.sinh(k * x) * (np.exp(-k * x) - np.exp(-k))) / k**2
    outer = np.exp(-k * x) * (np.cosh(k) - 1) / k**2
    return np.where(x <= 1, inner, outer)


F_EDGE2 = [Profile.zero(), Profile.constant(1.0)]


def test_closed_forms_are_consistent():
    # oracle self-check: -y'' - zeta y = f by finite differences of the closed forms
    x = np.linspace(0.1, 3.0, 3001)
    h = x[1] - x[0]
    for g, f in ((free_line, lambda t: (t <= 1).astype(float)), (dirichlet_half_line, lambda t: (t <= 1).astype(float))):
        y = g(x)
        lhs = -(y[2:] - 2 * y[1:-1] + y[:-2]) / h**2 - ZETA * y[1:-1]
        keep = np.abs(x[1:-1] - 1) > 2 * h
        assert np.max(np.abs(lhs - f(x[1:-1]))[keep]) < 1e-5
    assert abs(dirichlet_half_line(0.0)) < 1e-15


def test_decay_rate_branch():
    for z in (1j, -2 + 0.5j, 1 - 1j):
        k = decay_rate(z)
        assert k.real > 0 and k * k == pytest.approx(-z)
    with pytest.raises(DomainError):
        decay_rate(1.0)


# -- regularized operator -----------------------------------------------------------

def _free_pot(n=2, eps=0.01):
    return RegularizedPotential(CoulombSpec.zero(n), ShortRangeSpec.uniform(n), eps)


def test_regularized_free_line_matches_green_function():
    sol = solve_regularized(_free_pot(), ZETA, F_EDGE2, MeshPolicy(T=30.0))
    err = max(np.max(np.abs(sol.y.values[0] - free_line(-sol.y.meshes[0].nodes))),
              np.max(np.abs(sol.y.values[1] - free_line(sol.y.meshes[1].nodes))))
    assert err < 1e-6
    assert sol.residual < 1e-12


def test_regularized_zero_forcing():
    sol = solve_regularized(_free_pot(3), ZETA, [Profile.zero()] * 3)
    assert sol.y.sup_norm() == 0.0


def test_sparse_matches_dense_on_coarse_mesh():
    sr = ShortRangeSpec.uniform(2, kappa=1.0, U=0.5, V=-1.0)
    pot = RegularizedPotential(CoulombSpec([1.0, -0.5]), sr, 0.5)
    meshes = [uniform_mesh(k, 2.0, 0.025, breakpoints=pot.breakpoints(k)) for k in range(2)]
    f = [Profile.constant(1.0), Profile.constant(2.0, 0.0, 0.5)]
    a = solve_regularized(pot, ZETA, f, meshes=meshes, method="sparse")
    b = solve_regularized(pot, ZETA, f, meshes=meshes, method="dense")
    assert sum(m.size - 1 for m in meshes) - 1 <= 400
    assert max(np.max(np.abs(u - v)) for u, v in zip(a.y.values, b.y.values)) < 1e-10


def test_discrete_operator_is_symmetric():
    sr = ShortRangeSpec.uniform(3, kappa=2.0, U=1.0, V=-2.0)
    pot = RegularizedPotential(CoulombSpec([1.0, 2.0, 3.0]), sr, 0.1)
    meshes = [uniform_mesh(k, 3.0, 0.005, breakpoints=pot.breakpoints(k)) for k in range(3)]
    K = assemble_regularized(pot, 0.5j, [Profile.zero()] * 3, meshes).matrix
    S = K + 0.5j * sp_diag(K, pot, meshes)
    assert abs(S - S.T).max() < 1e-9 * abs(S).max()
    assert abs(S.imag).max() == 0.0


def sp_diag(K, pot, meshes):
    # lumped mass matrix (trapezoid weights; shared vertex node)
    import scipy.sparse as sp

    w = [0.5 * sum(m.steps[0] for m in meshes)]
    for m in meshes:
        w.extend(m.weights()[1:-1])
    return sp.diags(np.array(w))


def test_regularized_resolvent_bound_and_adjoint_symmetry():
    sr = ShortRangeSpec.uniform(3, kappa=2.0, U=1.0, V=-np.pi**2 / 4)
    pot = RegularizedPotential(CoulombSpec([1.0, 2.0, 3.0]), sr, 0.05)
    rng = np.random.default_rng(4)
    meshes = [geometric_mesh(k, 10.0, 0.05 / 40, 1.02, 0.01, start=0.05, breakpoints=pot.breakpoints(k))
              for k in range(3)]
    for zeta in (1j, -2 + 0.5j, 3 - 0.2j):
        f = GridFunction(meshes, [rng.normal(size=m.size) * np.exp(-m.nodes) for m in meshes])
        g = GridFunction(meshes, [rng.normal(size=m.size) * np.exp(-m.nodes) for m in meshes])
        Rf = solve_regularized(pot, zeta, f, meshes=meshes).y
        Rg = solve_regularized(pot, np.conj(zeta), g, meshes=meshes).y
        assert Rf.l2_norm() <= 1.05 * f.l2_norm() / abs(zeta.imag)
        lhs, rhs = l2_inner(Rf, g), l2_inner(f, Rg)
        assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(lhs))


def test_regularized_second_order_mesh_convergence():
    # smooth forcing, Q = 0: successive differences shrink by ~4
    pot = _free_pot(2, 0.5)
    f = [lambda t: np.exp(-((t - 1.0) ** 2) * 4), lambda t: np.cos(t) * np.exp(-t)]
    vals = []
    for h in (0.04, 0.02, 0.01, 0.005):
        meshes = [uniform_mesh(k, 8.0, h) for k in range(2)]
        fg = GridFunction.from_callables(meshes, f)
        vals.append(solve_regularized(pot, ZETA, fg, meshes=meshes).y.values[0][0])
    d = np.abs(np.diff(vals))
    ratios = d[:-1] / d[1:]
    assert np.all((ratios > 3.5) & (ratios < 4.5))


def test_regularized_rejects_real_zeta_and_bad_meshes():
    with pytest.raises(DomainError):
        solve_regularized(_free_pot(), 2.0, F_EDGE2)
    with pytest.raises(StructuralError):
        solve_regularized(_free_pot(), ZETA, F_EDGE2, meshes=[uniform_mesh(0, 3.0, 0.1)])
    with pytest.raises(StructuralError):
        solve_regularized(_free_pot(), ZETA, [Profile.zero()] * 3)


# -- limit operator -------------------------------------------------------------------

def test_limit_free_line_matches_green_function():
    sol = solve_limit(CoulombSpec.zero(2), VertexConditions.kirchhoff(2), ZETA, F_EDGE2, T=30.0)
    tau = np.linspace(0.0, 30.0, 3001)
    assert np.max(np.abs(sol.edge_values(0, tau) - free_line(-tau))) < 1e-6
    assert np.max(np.abs(sol.edge_values(1, tau) - free_line(tau))) < 1e-6


def test_limit_dirichlet_half_line():
    sol = solve_limit(CoulombSpec.zero(2), VertexConditions.dirichlet(2), ZETA, F_EDGE2, T=30.0)
    tau = np.linspace(0.0, 30.0, 3001)
    assert np.max(np.abs(sol.edge_values(1, tau) - dirichlet_half_line(tau))) < 1e-6
    # q = 0: quasi-derivatives are ordinary derivatives
    k = np.sqrt(-ZETA)
    assert sol.qderivs[1] == pytest.approx((1 - np.exp(-k)) / k, abs=1e-8)


def test_dirichlet_sum_decouples_and_matches_limit():
    cs = CoulombSpec([1.0, -0.5, 2.0])
    f = [Profile.constant(1.0), Profile.zero(), Profile.zero()]
    a = solve_dirichlet_sum(cs, ZETA, f)
    b = solve_limit(cs, VertexConditions(np.eye(3), np.zeros((3, 3))), ZETA, f)
    tau = np.linspace(0.0, a.T, 500)
    for k in (1, 2):
        assert np.max(np.abs(a.edge_values(k, tau))) == 0.0
    assert np.allclose(a.edge_values(0, tau), b.edge_values(0, tau), atol=1e-14)
    assert np.max(np.abs(a.values)) < 1e-10


def test_dirichlet_sum_free_case_closed_form():
    sol = solve_dirichlet_sum(CoulombSpec.zero(3), ZETA, [Profile.constant(1.0)] * 3, T=30.0)
    tau = np.linspace(0.0, 30.0, 1001)
    for k in range(3):
        assert np.max(np.abs(sol.edge_values(k, tau) - dirichlet_half_line(tau))) < 1e-6


def test_limit_quasi_derivatives_satisfy_conditions_and_fit():
    sr = ShortRangeSpec.uniform(3, kappa=2.0, U=1.0)
    cs = CoulombSpec([1.0, 2.0, 3.0])
    vc = assemble_vertex_conditions(build_matrices(solve_half_bound_states(sr), sr, cs))
    sol = solve_limit(cs, vc, ZETA, [Profile.constant(1.0 + 0.5 * k) for k in range(3)])
    assert sol.condition_residual < 1e-12
    assert np.ptp(sol.values.real) < 1e-12 and np.ptp(sol.values.imag) < 1e-12
    assert sol.qd.reliable and sol.qd.fit_discrepancy < 1e-4


def test_line_point_interaction_with_coulomb_tails():
    # q_left = -1, q_right = 2 (graph (1, 2)), kappa integrals 1.5 + 1.5 = 3
    u = 0.8
    sr = ShortRangeSpec.uniform(2, kappa=1.5, U=u)
    cs = CoulombSpec(line_to_graph_q(-1.0, 2.0))
    vc = assemble_vertex_conditions(build_matrices(solve_half_bound_states(sr), sr, cs))
    sol = solve_limit(cs, vc, ZETA, [Profile.constant(1.0), Profile.constant(0.5)])
    y0 = sol.values
    assert abs(y0[0] - y0[1]) < 1e-10
    # the outgoing quasi-derivatives sum to the jump phi^[1](+0) - phi^[1](-0)
    assert abs(sol.qderivs.sum() - 2 * u * y0[0]) < 1e-10


def _profile_inner(sol, g):
    """Integral of sum_k y_k conj(g_k) for piecewise-constant g on [0, 1] (Gauss on graded panels)."""
    x, w = np.polynomial.legendre.leggauss(20)
    edges = np.concatenate([[0.0], np.geomspace(1e-12, 1.0, 60)])
    total = 0.0
    for k, gk in enumerate(g):
        c = gk(0.5)
        if c == 0:
            continue
        for a, b in zip(edges[:-1], edges[1:]):
            t = 0.5 * (b - a) * x + 0.5 * (b + a)
            total += np.sum(0.5 * (b - a) * w * sol.edge_values(k, t)) * np.conj(c)
    return total


def test_limit_adjoint_symmetry_and_resolvent_bound():
    sr = ShortRangeSpec.uniform(3, kappa=[1.0, 2.0, 3.0], U=[1.0, -0.5, 0.3], V=-np.pi**2 / 4)
    cs = CoulombSpec([1.0, 2.0, 3.0])
    vc = assemble_vertex_conditions(build_matrices(solve_half_bound_states(sr), sr, cs))
    f = [Profile.constant(1.0), Profile.constant(-2.0), Profile.zero()]
    g = [Profile.zero(), Profile.constant(0.5), Profile.constant(3.0)]
    for zeta in (1j, -2 + 0.5j):
        Rf = solve_limit(cs, vc, zeta, f)
        Rg = solve_limit(cs, vc, np.conj(zeta), g)
        lhs = _profile_inner(Rf, g)
        rhs = np.conj(_profile_inner(Rg, f))
        assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(lhs))
        meshes = [geometric_mesh(k, Rf.T, 1e-7, 1.02, 2e-3, breakpoints=[1.0]) for k in range(3)]
        y = Rf.sample(meshes)
        fnorm = np.sqrt(1.0 + 4.0)
        assert y.l2_norm() <= 1.05 * fnorm / abs(zeta.imag)


def test_truncation_robustness():
    cs = CoulombSpec([1.0, -1.0, 0.5])
    vc = VertexConditions.kirchhoff(3, 1.0)
    f = [Profile.constant(1.0)] * 3
    for zeta in (1j, -2 + 0.5j):
        c = decay_rate(zeta).real
        T = 8.0 / c
        a = solve_limit(cs, vc, zeta, f, T=T).values
        b = solve_limit(cs, vc, zeta, f, T=2 * T).values
        assert np.max(np.abs(a - b)) < np.exp(-c * T)


def test_limit_rejects_bad_input():
    with pytest.raises(DomainError):
        solve_limit(CoulombSpec.zero(2), VertexConditions.kirchhoff(2), 0.0, F_EDGE2)
    with pytest.raises(StructuralError):
        solve_limit(CoulombSpec.zero(3), VertexConditions.kirchhoff(2), ZETA, F_EDGE2)


def test_problem_dispatch():
    pot = _free_pot()
    r = solve(ResolventProblem(ZETA, F_EDGE2, pot), policy=MeshPolicy(T=30.0))
    l = solve(ResolventProblem(ZETA, F_EDGE2, (CoulombSpec.zero(2), VertexConditions.kirchhoff(2))), T=30.0)
    d = solve(ResolventProblem(ZETA, F_EDGE2, CoulombSpec.zero(2)), T=30.0)
    assert abs(r.y.values[0][0] - l.values[0]) < 1e-6
    assert abs(d.values[0]) < 1e-12
    with pytest.raises(DomainError):
        ResolventProblem(2.0, F_EDGE2, pot)


# -- quasi-derivative extraction -----------------------------------------------------------

def _graded(lo=1e-6, hi=2e-2, ratio=1 + 5e-4):
    m = int(np.ceil(np.log(hi / lo) / np.log(ratio)))
    return np.concatenate([[0.0], lo * ratio ** np.arange(m + 1)])


def test_extract_linear():
    tau = _graded()
    b, res = extract_quasi_derivative((tau, tau.astype(complex)), 0.0, 0.0)
    assert b == pytest.approx(1.0, abs=1e-6) and res < 1e-8


@pytest.mark.parametrize("q", [0.7, -1.3, 3.0])
def test_extract_primitive_of_log(q):
    tau = _graded()
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(tau > 0, 1 + q * tau * np.log(tau) - q * tau, 1.0)
    b, _ = extract_quasi_derivative((tau, y), q, 1.0)
    assert abs(b) < 1e-6


@pytest.mark.parametrize("q,c", [(0.7, 2.5), (-1.3, -0.4)])
def test_extract_general_constant(q, c):
    tau = _graded()
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(tau > 0, 1 + q * tau * np.log(tau) + (c - q) * tau, 1.0)
    b, _ = extract_quasi_derivative((tau, y), q, 1.0)
    assert abs(b - c) < 1e-6


def test_extract_from_grid_function_and_errors():
    tau = _graded()
    m = EdgeMesh(0, np.concatenate([tau, [2.0]]))
    y = GridFunction((m, m), (m.nodes, 2 * m.nodes))
    b, _ = extract_quasi_derivative(y, 0.0, 0.0, edge=1)
    assert b == pytest.approx(2.0, abs=1e-8)
    with pytest.raises(DomainError):
        extract_quasi_derivative(y, 0.0, 0.0, window=(0.0, 1e-2))
    with pytest.raises(DomainError):
        extract_quasi_derivative((np.array([0.0, 0.5, 1.0]), np.zeros(3)), 0.0, 0.0, window=(0.1, 0.9))
