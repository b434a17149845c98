"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run directly with ``python tests/test_acceptance.py`` or through pytest.
"""
import sys
import time

import numpy as np
import pytest

from coulomb_graph.coupling import (
    VertexConditions,
    assemble_vertex_conditions,
    basis_change_invariance_check,
    build_matrices,
    condition_subspace,
    decompose,
    max_principal_angle,
    symplectic_form,
)
from coulomb_graph.experiments import get_scenario, random_scenario, run_sweep
from coulomb_graph.graph_core import GridFunction, geometric_mesh, uniform_mesh
from coulomb_graph.potentials import CoulombSpec, Profile, RegularizedPotential, ShortRangeSpec
from coulomb_graph.resonance import solve_half_bound_states
from coulomb_graph.solver import MeshPolicy, extract_quasi_derivative, solve_limit, solve_regularized

PI2_4 = np.pi**2 / 4
THREADS = 4


def _timed(fn, *a, **kw):
    t0 = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t0


# -- 1 ------------------------------------------------------------------------------

def test_criterion_1_resonance_dimensions(criterion):
    fails = []
    res, dt = _timed(solve_half_bound_states, 0.0, n=3)
    L = res.L[:, 0] / res.L[0, 0]
    if res.r != 1 or np.max(np.abs(L - 1)) > 1e-8 or dt >= 1:
        fails.append(f"V=0: r={res.r}, dev={np.max(np.abs(L - 1)):.1e}, t={dt:.2f}s")
    for n in (2, 3, 4):
        res, dt = _timed(solve_half_bound_states, -PI2_4, n=n)
        if res.r != n - 1 or dt >= 1:
            fails.append(f"cos-well n={n}: r={res.r}, t={dt:.2f}s")
    res, dt = _timed(solve_half_bound_states, 10.0, n=3)
    if res.r != 0 or dt >= 1:
        fails.append(f"V=10: r={res.r}")
    assert criterion(1, not fails, "; ".join(fails)), fails


# -- 2 ------------------------------------------------------------------------------

def test_criterion_2_pseudoinverse_and_delta_conditions(criterion):
    u0 = 1.3
    sr = ShortRangeSpec.uniform(3, U=u0)
    res = solve_half_bound_states(sr).rebased([[np.sqrt(3)]])  # basis state = 1 on the core
    cm = build_matrices(res, sr, CoulombSpec.zero(3))
    lp_err = float(np.max(np.abs(cm.Lplus - 1 / 3)))
    vc = assemble_vertex_conditions(cm)
    total = 3 * u0  # integral of U over the graph
    basis = [np.concatenate([np.ones(3), [total, 0, 0]]),
             np.concatenate([np.zeros(3), [1, -1, 0]]),
             np.concatenate([np.zeros(3), [0, 1, -1]])]
    S = np.linalg.qr(np.array(basis).T)[0]
    angle = max_principal_angle(condition_subspace(vc), S)
    ok = lp_err <= 1e-12 and angle <= 1e-9
    assert criterion(2, ok, f"L+ error {lp_err:.1e}, principal angle {angle:.1e}")


# -- 3 ------------------------------------------------------------------------------

def test_criterion_3_self_adjointness_property_suite(criterion):
    rng = np.random.default_rng(20240603)
    modes = ("generic", "simple", "full")
    t0 = time.perf_counter()
    worst_herm = worst_green = 0.0
    bad = 0
    resonant = 0
    for i in range(200):
        cs, sr = random_scenario(rng, mode=modes[i % 3])
        res = solve_half_bound_states(sr)
        resonant += res.r > 0
        vc = assemble_vertex_conditions(build_matrices(res, sr, cs))
        n = vc.A.shape[0]
        rank = np.linalg.matrix_rank(np.hstack([vc.A, vc.B]))
        herm = np.linalg.norm(vc.A @ vc.B.conj().T - vc.B @ vc.A.conj().T)
        S = condition_subspace(vc)
        for _ in range(5):
            x = S @ (rng.normal(size=S.shape[1]) + 1j * rng.normal(size=S.shape[1]))
            y = S @ (rng.normal(size=S.shape[1]) + 1j * rng.normal(size=S.shape[1]))
            g = abs(symplectic_form(x, y)) / (np.linalg.norm(x) * np.linalg.norm(y))
            worst_green = max(worst_green, g)
        worst_herm = max(worst_herm, herm)
        bad += rank != n
    dt = time.perf_counter() - t0
    ok = bad == 0 and worst_herm <= 1e-10 and worst_green <= 1e-8 and dt < 30
    detail = (f"rank failures {bad}, max |AB*-BA*| {worst_herm:.1e}, max Green {worst_green:.1e}, "
              f"{resonant}/200 resonant, {dt:.1f}s")
    assert criterion(3, ok, detail)


# -- 4 ------------------------------------------------------------------------------

def test_criterion_4_basis_invariance(criterion):
    rng = np.random.default_rng(7)
    setups = [
        (CoulombSpec.zero(3), ShortRangeSpec.uniform(3, U=[0.7, -0.2, 1.1], V=-PI2_4)),
        (CoulombSpec([1.0, 2.0, 3.0]), ShortRangeSpec.uniform(3, kappa=2.0, U=0.5, V=-PI2_4)),
        (CoulombSpec([1.0, 2.0, 3.0]), ShortRangeSpec.uniform(3, kappa=0.0, U=0.5, V=-PI2_4)),
    ]
    worst = 0.0
    mismatched = 0
    for k in range(50):
        cs, sr = setups[k % len(setups)]
        res = solve_half_bound_states(sr)
        while True:
            X = rng.normal(size=(res.r, res.r)) + 1j * rng.normal(size=(res.r, res.r))
            if np.linalg.cond(X) < 1e6:
                break
        rep = basis_change_invariance_check(res, sr, cs, X)
        worst = max(worst, rep.principal_angle)
        mismatched += rep.convergence_verdicts[0] != rep.convergence_verdicts[1]
    ok = worst <= 1e-9 and mismatched == 0
    assert criterion(4, ok, f"max angle {worst:.1e}, verdict mismatches {mismatched}")


# -- 5 ------------------------------------------------------------------------------

def test_criterion_5_delta_resolvent_convergence(criterion):
    t0 = time.perf_counter()
    rep = run_sweep(get_scenario("a_delta"), threads=THREADS)
    dt = time.perf_counter() - t0
    z = rep.zetas[0]
    clean = z.err_limit > 10 * z.floor
    mono = bool(np.all(np.diff(z.err_limit[clean]) < 0))
    ok = (z.zeta == 1j and mono and z.rate_limit.p >= 0.25 and not z.rate_limit.inconclusive
          and z.bound_holds and dt < 300)
    detail = f"p = {z.rate_limit.p:.3f} +- {z.rate_limit.width:.3f}, C = {z.bound_constant:.3g}, {dt:.1f}s"
    assert criterion(5, ok, detail)


# -- 6 ------------------------------------------------------------------------------

def test_criterion_6_delta_prime_scenarios(criterion):
    fails, notes = [], []
    for sid in ("b_delta_prime_resonant", "b2_delta_prime_simple"):
        rep = run_sweep(get_scenario(sid), threads=THREADS)
        z = rep.zetas[0]
        if not (rep.kind == "scale_invariant" and z.outcome == "converges-to-H" and rep.passed):
            fails.append(f"{sid}: {z.outcome}, kind {rep.kind}")
        key = "manko" if "manko" in rep.checks else "resonant_projection"
        notes.append(f"{sid} {key} {rep.checks[key]:.1e}")
        if rep.checks[key] > 1e-6:
            fails.append(f"{sid}: {key} {rep.checks[key]:.1e}")
    rep = run_sweep(get_scenario("c_delta_prime_nonresonant"), threads=THREADS)
    z = rep.zetas[0]
    v = rep.checks["vertex_to_zero"]
    notes.append(f"vertex |y| {v['first']:.1e} -> {v['last']:.1e}")
    if not (rep.kind == "dirichlet_sum" and z.outcome == "converges-to-H" and v["monotone"]
            and v["last"] < 0.5 * v["first"]):
        fails.append(f"non-resonant: {z.outcome}, vertex {v}")
    assert criterion(6, not fails, "; ".join(fails or notes))


# -- 7 ------------------------------------------------------------------------------

def test_criterion_7_coulomb_scenarios(criterion):
    fails, notes = [], []
    e = run_sweep(get_scenario("e_coulomb_delta"), threads=THREADS)
    z = e.zetas[0]
    c = e.checks["condition_residual"]
    notes.append(f"e: p = {z.rate_limit.p:.2f}, residual {c['first']:.1e} -> {c['last']:.1e}")
    if not (e.convergence_condition and e.passed and z.outcome == "converges-to-H"):
        fails.append(f"e: {z.outcome}")
    f = run_sweep(get_scenario("f_coulomb_violated"), threads=THREADS)
    z = f.zetas[0]
    stagnates = (not z.limit_decays) and z.limit_intercept > 0.25 * z.err_limit[0]
    notes.append(f"f: limit intercept {z.limit_intercept:.3f}, Dirichlet intercept {z.dirichlet_intercept:.3f}")
    if f.convergence_condition or not (z.dirichlet_decays and stagnates and f.passed):
        fails.append(f"f: {z.outcome}")
    h = run_sweep(get_scenario("h_line_coulomb"), threads=THREADS)
    notes.append(f"h: line jump {h.checks['line_jump']:.1e}")
    if not (h.passed and h.zetas[0].outcome == "converges-to-H"):
        fails.append(f"h: {h.zetas[0].outcome}")
    i = run_sweep(get_scenario("i_line_cutoff"), threads=THREADS)
    if i.convergence_condition or not (i.passed and i.zetas[0].outcome == "converges-to-Dirichlet-sum"):
        fails.append(f"i: {i.zetas[0].outcome}")
    assert criterion(7, not fails, "; ".join(fails or notes))


# -- 8 ------------------------------------------------------------------------------

def _free_line(x, zeta):
    k = np.sqrt(-complex(zeta))
    left = np.exp(k * x) * (1 - np.exp(-k)) / (2 * k * k)
    mid = ((1 - np.exp(-k * x)) + (1 - np.exp(-k * (1 - x)))) / (2 * k * k)
    right = np.exp(-k * x) * (np.exp(k) - 1) / (2 * k * k)
    return np.where(x <= 0, left, np.where(x <= 1, mid, right))


def _dirichlet_half_line(x, zeta):
    k = np.sqrt(-complex(zeta))
    inner = (np.exp(-k * x) * (np.cosh(k * x) - 1) + np.sinh(k * x) * (np.exp(-k * x) - np.exp(-k))) / k**2
    outer = np.exp(-k * x) * (np.cosh(k) - 1) / k**2
    return np.where(x <= 1, inner, outer)


def test_criterion_8_solver_oracles(criterion):
    zeta = 1j
    f2 = [Profile.zero(), Profile.constant(1.0)]
    errs = {}
    # sparse vs dense on a coarse mesh
    sr = ShortRangeSpec.uniform(2, kappa=1.0, U=0.5, V=-1.0)
    pot = RegularizedPotential(CoulombSpec([1.0, -0.5]), sr, 0.5)
    meshes = [uniform_mesh(k, 2.0, 0.025, breakpoints=pot.breakpoints(k)) for k in range(2)]
    fc = [Profile.constant(1.0), Profile.constant(2.0, 0.0, 0.5)]
    a = solve_regularized(pot, zeta, fc, meshes=meshes, method="sparse")
    b = solve_regularized(pot, zeta, fc, meshes=meshes, method="dense")
    errs["sparse/dense"] = max(np.max(np.abs(u - v)) for u, v in zip(a.y.values, b.y.values))
    # closed-form Green functions
    free = RegularizedPotential(CoulombSpec.zero(2), ShortRangeSpec.uniform(2), 0.01)
    sol = solve_regularized(free, zeta, f2, MeshPolicy(T=30.0))
    errs["free line (FD)"] = max(np.max(np.abs(sol.y.values[0] - _free_line(-sol.y.meshes[0].nodes, zeta))),
                                 np.max(np.abs(sol.y.values[1] - _free_line(sol.y.meshes[1].nodes, zeta))))
    tau = np.linspace(0.0, 30.0, 3001)
    lim = solve_limit(CoulombSpec.zero(2), VertexConditions.kirchhoff(2), zeta, f2, T=30.0)
    errs["free line (limit)"] = max(np.max(np.abs(lim.edge_values(0, tau) - _free_line(-tau, zeta))),
                                    np.max(np.abs(lim.edge_values(1, tau) - _free_line(tau, zeta))))
    lim = solve_limit(CoulombSpec.zero(2), VertexConditions.dirichlet(2), zeta, f2, T=30.0)
    errs["Dirichlet half-line"] = np.max(np.abs(lim.edge_values(1, tau) - _dirichlet_half_line(tau, zeta)))
    # quasi-derivative extraction: y = tau; 1 + q tau ln tau - q tau; 1 + q tau ln tau + (c - q) tau
    lo, hi, ratio = 1e-6, 2e-2, 1 + 5e-4
    g = np.concatenate([[0.0], lo * ratio ** np.arange(int(np.ceil(np.log(hi / lo) / np.log(ratio))) + 1)])
    t = g[1:]
    qd = [abs(extract_quasi_derivative((g, g.astype(complex)), 0.0, 0.0)[0] - 1.0)]
    for q, c in ((0.7, 0.0), (-1.3, 0.0), (0.7, 2.5), (-1.3, -0.4), (3.0, 1.0)):
        y = np.concatenate([[1.0], 1 + q * t * np.log(t) + (c - q) * t])
        qd.append(abs(extract_quasi_derivative((g, y), q, 1.0)[0] - c))
    errs["quasi-derivative"] = max(qd)
    # resolvent bound on random forcings, regularized and limit operators
    rng = np.random.default_rng(11)
    sr = ShortRangeSpec.uniform(3, kappa=2.0, U=1.0, V=-PI2_4)
    cs = CoulombSpec([1.0, 2.0, 3.0])
    pot = RegularizedPotential(cs, sr, 0.05)
    ms = [geometric_mesh(k, 10.0, 0.05 / 40, 1.02, 0.01, start=0.05, breakpoints=pot.breakpoints(k))
          for k in range(3)]
    vc = assemble_vertex_conditions(build_matrices(solve_half_bound_states(sr), sr, cs))
    worst = 0.0
    for zeta_k in (1j, -2 + 0.5j, 3 - 0.2j, 0.1j):
        for _ in range(3):
            fg = GridFunction(ms, [rng.normal(size=m.size) * np.exp(-m.nodes) for m in ms])
            y = solve_regularized(pot, zeta_k, fg, meshes=ms).y
            worst = max(worst, y.l2_norm() * abs(zeta_k.imag) / fg.l2_norm())
        amps = rng.normal(size=3)
        lim = solve_limit(cs, vc, zeta_k, [Profile.constant(a_) for a_ in amps])
        ym = lim.sample([geometric_mesh(k, lim.T, 1e-7, 1.02, 2e-3, breakpoints=[1.0]) for k in range(3)])
        worst = max(worst, ym.l2_norm() * abs(zeta_k.imag) / np.linalg.norm(amps))
    errs["resolvent ratio"] = worst
    ok = (errs["sparse/dense"] <= 1e-10 and errs["free line (FD)"] <= 1e-6 and errs["free line (limit)"] <= 1e-6
          and errs["Dirichlet half-line"] <= 1e-6 and errs["quasi-derivative"] <= 1e-6 and worst <= 1.05)
    assert criterion(8, ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))


# -- 9 ------------------------------------------------------------------------------

def test_criterion_9_decomposition(criterion):
    spec = get_scenario("g_block_resonant")
    rep = decompose(solve_half_bound_states(spec.short_range))
    part = rep.partition()
    sweep = run_sweep(spec, threads=THREADS)
    leak = sweep.checks["block_diagonal"]["leak"]
    # 0-based {0, 1} and {2, 3} are the edges E1 = {1, 2} and E0 = {3, 4}
    ok = part[0] == {2, 3} and part[1:] == [{0, 1}] and leak <= 1e-8
    assert criterion(9, ok, f"E0 = {sorted(e + 1 for e in part[0])}, "
                            f"E1 = {sorted(e + 1 for e in part[1])}, cross-block {leak:.1e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
