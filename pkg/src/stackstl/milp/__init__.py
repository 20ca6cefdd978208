"""Mixed-integer linear programming: model builder, embedded solver, backends."""

from .backends import (BackendUnavailable, EmbeddedBackend, HighsBackend, LPFileBackend,
                       SolverBackend, available_backends, backend_solve, get_backend,
                       register_backend)
from .bnb import FEAS_TOL, INT_TOL, SolveLimits, propagate, solve_lp, solve_milp
from .lpfile import read_lp, write_lp
from .model import (LinConstraint, LinExpr, MilpModel, ModelError, ObjSense, Sense,
                    SolveResult, Status, Var, Variable, VarKind)

__all__ = [
    "BackendUnavailable", "EmbeddedBackend", "HighsBackend", "LPFileBackend", "SolverBackend",
    "available_backends", "backend_solve", "get_backend", "register_backend",
    "FEAS_TOL", "INT_TOL", "SolveLimits", "propagate", "solve_lp", "solve_milp",
    "read_lp", "write_lp",
    "LinConstraint", "LinExpr", "MilpModel", "ModelError", "ObjSense", "Sense",
    "SolveResult", "Status", "Var", "Variable", "VarKind",
]
