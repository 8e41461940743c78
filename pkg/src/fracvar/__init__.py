"""Delayed fractional variational problems on uniform grids.

Discrete fractional operators, the cost functional with its running
integral state, residuals of the first-order optimality system, a direct
minimizer and a sampled sufficiency certificate.
"""

from fracvar.eulerlagrange import ELReport, classical_residual, el_report
from fracvar.expr import differentiate, evaluate, parse
from fracvar.fracops import Grid, SampledPath, make_grid
from fracvar.functional import evaluate_fields, evaluate_J
from fracvar.ibp import verify_ibp_caputo, verify_ibp_integral, verify_ibp_split
from fracvar.problem import (
    ProblemSpec,
    Trajectory,
    builtin_example,
    load_problem,
    make_reference,
    make_spec,
    make_trajectory,
)
from fracvar.solver import SolverConfig, SolverResult, minimize
from fracvar.sufficiency import certify, check_convexity

__version__ = "0.1.0"

__all__ = [
    "ELReport",
    "Grid",
    "ProblemSpec",
    "SampledPath",
    "SolverConfig",
    "SolverResult",
    "Trajectory",
    "builtin_example",
    "certify",
    "check_convexity",
    "classical_residual",
    "differentiate",
    "el_report",
    "evaluate",
    "evaluate_J",
    "evaluate_fields",
    "load_problem",
    "make_grid",
    "make_reference",
    "make_spec",
    "make_trajectory",
    "minimize",
    "parse",
    "verify_ibp_caputo",
    "verify_ibp_integral",
    "verify_ibp_split",
]
