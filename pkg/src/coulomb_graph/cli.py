"""Command-line front end.

Exit codes: 0 success, 1 solver failure, 2 usage or configuration error,
3 filesystem error (e.g. a missing output directory).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .config import Config, load_config
from .coupling import (
    assemble_vertex_conditions,
    basis_change_invariance_check,
    build_matrices,
    check_convergence_condition,
    check_self_adjoint,
    describe_conditions,
)
from .errors import CoulombGraphError, DomainError
from .experiments import SweepSpec, get_scenario, run_sweep, scenario_library
from .potentials import RegularizedPotential
from .resonance import solve_half_bound_states
from .solver import limit_meshes, solve_dirichlet_sum, solve_limit, solve_regularized

EXIT_OK, EXIT_SOLVER, EXIT_USAGE, EXIT_FS = 0, 1, 2, 3


class _UsageError(Exception):
    pass


def _num(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _write_matrix_long(path: Path, M: np.ndarray):
    rows = [[i, j, _num(M[i, j].real), _num(M[i, j].imag)] for i in range(M.shape[0]) for j in range(M.shape[1])]
    _write_csv(path, ["row", "col", "re", "im"], rows)


def _out_dir(args, cfg: Config | None) -> Path | None:
    out = args.out or (cfg.output_dir if cfg else None)
    if out is None:
        return None
    path = Path(out)
    if not path.is_dir():
        raise FileNotFoundError(f"output directory {path} does not exist")
    return path


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{x:.10g}" for x in np.real_if_close(np.asarray(v))) + "]"


# -- commands ----------------------------------------------------------------------

def cmd_resonance(cfg: Config, args) -> int:
    sr = cfg.short_range()
    out = _out_dir(args, cfg)
    if args.dry_run:
        print("configuration ok")
        return EXIT_OK
    res = solve_half_bound_states(sr, tol=cfg.solver.resonance_tol)
    print(f"n = {res.n}")
    print(f"r = {res.r}")
    print("singular values = " + _fmt_vec(res.singular_values))
    for k in range(res.n):
        print(f"L[{k + 1}] = " + _fmt_vec(res.L[k]))
    if out is not None:
        _write_csv(out / "resonance_L.csv", ["edge"] + [f"psi_{j + 1}" for j in range(res.r)],
                   [[k + 1] + [_num(x) for x in res.L[k]] for k in range(res.n)])
        _write_csv(out / "resonance_singular_values.csv", ["index", "sigma"],
                   [[i + 1, _num(s)] for i, s in enumerate(res.singular_values)])
    return EXIT_OK


def cmd_conditions(cfg: Config, args) -> int:
    sr = cfg.short_range()
    cs = cfg.coulomb()
    out = _out_dir(args, cfg)
    if args.dry_run:
        print("configuration ok")
        return EXIT_OK
    user = cfg.user_conditions()
    if user is not None:
        vc = user
        conv = None
    else:
        res = solve_half_bound_states(sr, tol=cfg.solver.resonance_tol)
        cm = build_matrices(res, sr, cs)
        vc = assemble_vertex_conditions(cm)
        conv = check_convergence_condition(cm)
    sa = check_self_adjoint(vc)
    print(f"kind = {vc.kind}")
    print(describe_conditions(vc))
    print(f"self-adjoint = {str(sa).lower()}")
    if conv is not None:
        print(f"convergence condition = {str(bool(conv.holds)).lower()} (residual {conv.residual:.3e})")
        if res.r:
            rng = np.random.default_rng(args.seed if args.seed is not None else cfg.seed)
            X = rng.normal(size=(res.r, res.r)) + 1j * rng.normal(size=(res.r, res.r)) + 2 * np.eye(res.r)
            inv = basis_change_invariance_check(res, sr, cs, X)
            print(f"basis invariance = {str(bool(inv.ok)).lower()} (angle {inv.principal_angle:.3e})")
    if out is not None:
        _write_matrix_long(out / "conditions_A.csv", vc.A)
        _write_matrix_long(out / "conditions_B.csv", vc.B)
    return EXIT_OK


def cmd_solve(cfg: Config, args) -> int:
    n = cfg.require_graph()
    cs = cfg.coulomb()
    sr = cfg.short_range()
    f = cfg.forcing()
    out = _out_dir(args, cfg)
    s = cfg.solver
    if s.operator == "regularized" and s.epsilon is None:
        raise _UsageError("solver.epsilon is required for the regularized operator")
    if args.dry_run:
        print("configuration ok")
        return EXIT_OK
    zeta = s.zeta_c
    policy = cfg.policy()
    T = policy.truncation(zeta)
    if s.operator == "regularized":
        sol = solve_regularized(RegularizedPotential(cs, sr, s.epsilon), zeta, f, policy)
        y = sol.y
        print(f"residual = {sol.residual:.3e}")
        print("y(eps) = " + _fmt_vec(sol.boundary_values))
    else:
        if s.operator == "limit":
            user = cfg.user_conditions()
            if user is None:
                res = solve_half_bound_states(sr, tol=s.resonance_tol)
                user = assemble_vertex_conditions(build_matrices(res, sr, cs))
            sol = solve_limit(cs, user, zeta, f, T=T, fit_window=s.fit_window)
        else:
            sol = solve_dirichlet_sum(cs, zeta, f, T=T, fit_window=s.fit_window)
        y = sol.sample(limit_meshes(n, T, h_max=s.h_max, extra_breaks=[p.breaks for p in f]))
        print("y(0) = " + _fmt_vec(sol.values))
        print("y^[1](0) = " + _fmt_vec(sol.qderivs))
        print(f"vertex condition residual = {sol.condition_residual:.3e}")
        print(f"quasi-derivative fit reliable = {str(sol.qd.reliable).lower()}")
    print(f"L2 norm = {y.l2_norm():.10g}")
    if out is not None:
        for k, (m, v) in enumerate(zip(y.meshes, y.values)):
            _write_csv(out / f"solution_edge{k + 1}.csv", ["tau", "re", "im"],
                       ([_num(t), _num(z.real), _num(z.imag)] for t, z in zip(m.nodes, v)))
    return EXIT_OK


def _sweep_spec(cfg: Config) -> SweepSpec:
    sw = cfg.sweep
    if sw.scenario:
        spec = get_scenario(sw.scenario)
    else:
        spec = SweepSpec("custom", cfg.coulomb(), cfg.short_range(), forcing=cfg.forcing(),
                         expected=sw.expected, checks=tuple(sw.checks), policy=cfg.policy(),
                         conditions=cfg.user_conditions())
    kw = {}
    if sw.eps is not None:
        kw["eps"] = tuple(sw.eps)
    if sw.zetas is not None:
        kw["zetas"] = tuple(complex(*z) for z in sw.zetas)
    return spec.with_(**kw) if kw else spec


def cmd_sweep(cfg: Config, args) -> int:
    if args.scenario:
        cfg.sweep.scenario = args.scenario
    spec = _sweep_spec(cfg)
    out = _out_dir(args, cfg)
    if args.dry_run:
        print(f"configuration ok: scenario {spec.scenario_id}, {len(spec.eps)} eps values, {len(spec.zetas)} zeta values")
        return EXIT_OK
    report = run_sweep(spec, threads=max(1, args.threads), out=out)
    for z in report.zetas:
        print(f"zeta = {z.zeta}: outcome {z.outcome}")
        for r in z.records:
            print(f"  eps = {r.eps:.6g}  err_vs_limit = {r.err_vs_limit:.6e}  err_vs_dirichlet = {r.err_vs_dirichlet:.6e}")
        if not z.rate_limit.inconclusive:
            print(f"  fitted order p = {z.rate_limit.p:.4f} +- {z.rate_limit.width:.4f}")
        print(f"  discretization floor = {z.floor:.3e}")
    print(f"{spec.scenario_id}: {'PASS' if report.passed else 'FAIL'} (expected {spec.expected})")
    return EXIT_OK


def cmd_scenarios(cfg, args) -> int:
    for s in scenario_library():
        print(f"{s.scenario_id:28s} n={s.n}  expected={s.expected:9s} {s.description}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON or YAML configuration file")
    common.add_argument("--out", type=Path, help="existing output directory")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--dry-run", action="store_true", help="validate the configuration only")

    p = argparse.ArgumentParser(prog="coulomb-graph", description="Coulomb-type vertex couplings on star graphs")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("resonance", parents=[common], help="zero-energy resonances of V")
    sub.add_parser("conditions", parents=[common], help="limit vertex conditions and their checks")
    sub.add_parser("solve", parents=[common], help="one resolvent problem")
    sw = sub.add_parser("sweep", parents=[common], help="eps sweep against the limit operators")
    sw.add_argument("--scenario", help="scenario id from the library (see 'scenarios')")
    sub.add_parser("scenarios", parents=[common], help="list the scenario library")
    return p


_COMMANDS = {
    "resonance": cmd_resonance,
    "conditions": cmd_conditions,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "scenarios": cmd_scenarios,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        elif args.command in ("scenarios", "sweep"):
            cfg = Config()
        else:
            raise _UsageError(f"'{args.command}' needs --config")
        return _COMMANDS[args.command](cfg, args)
    except (_UsageError, ValidationError, DomainError, ValueError) as exc:
        if isinstance(exc, FileNotFoundError):  # pragma: no cover - FileNotFoundError is an OSError
            raise
        print(f"coulomb-graph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, NotADirectoryError, PermissionError) as exc:
        print(f"coulomb-graph: filesystem error: {exc}", file=sys.stderr)
        return EXIT_FS
    except CoulombGraphError as exc:
        print(f"coulomb-graph: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"coulomb-graph: filesystem error: {exc}", file=sys.stderr)
        return EXIT_FS


if __name__ == "__main__":
    sys.exit(main())
