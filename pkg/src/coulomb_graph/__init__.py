"""Schrodinger operators on star graphs with Coulomb-type and scaled short-range potentials.

Zero-energy resonances, limit vertex couplings, resolvent solvers for the
regularized and limit operators, and epsilon-sweep experiments.
"""

from .errors import CoulombGraphError, DomainError, InconsistencyError, NumericalError, StructuralError
from .graph_core import EdgeMesh, GridFunction, StarGraph, geometric_mesh, l2_inner, l2_norm, uniform_mesh, vertex_values
from .potentials import (
    CoulombSpec,
    Profile,
    RegularizedPotential,
    ShortRangeSpec,
    eval_Q,
    eval_Qeps,
    eval_Weps,
    line_to_graph_q,
)
from .resonance import ResonanceData, ell_map, is_injective_ell, solve_half_bound_states
from .coupling import (
    CouplingMatrices,
    VertexConditions,
    assemble_vertex_conditions,
    basis_change_invariance_check,
    build_matrices,
    check_convergence_condition,
    check_self_adjoint,
    decompose,
    describe_conditions,
)
from .solver import (
    MeshPolicy,
    QuasiDerivativeData,
    ResolventProblem,
    extract_quasi_derivative,
    solve,
    solve_dirichlet_sum,
    solve_limit,
    solve_regularized,
)
from .experiments import ConvergenceReport, SweepSpec, fit_rate, get_scenario, run_sweep, scenario_library

__version__ = "0.1.0"
