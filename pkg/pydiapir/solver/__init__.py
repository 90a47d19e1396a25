from pydiapir.solver.exceptions import NoConvergence, SolverBreakdown
from pydiapir.solver.solver_base import PyDiapirSolverBase, SolveReport
from pydiapir.solver.solver_direct import PyDiapirDirectSolver
from pydiapir.solver.solver_krylov import PyDiapirKrylovSolver

SOLVERS = {
    PyDiapirDirectSolver.method: PyDiapirDirectSolver,
    PyDiapirKrylovSolver.method: PyDiapirKrylovSolver,
}


def make_solver(method="direct", tol=1e-6, max_iter=500) -> PyDiapirSolverBase:
    if method not in SOLVERS:
        raise ValueError(f"unknown solver method '{method}' (choose from {', '.join(SOLVERS)})")
    return SOLVERS[method](tol=tol, max_iter=max_iter)


def solve(system, tol=1e-6, max_iter=500, method="direct"):
    """Solve the assembled system; returns (u_free, SolveReport)"""
    return make_solver(method, tol, max_iter).solve(system, tol, max_iter)
