import logging

from scipy.sparse.linalg import splu

from pydiapir.solver.exceptions import SolverBreakdown
from pydiapir.solver.solver_base import PyDiapirSolverBase, relative_residual

log = logging.getLogger(__name__)

# iterative refinement sweeps on top of the factorization
REFINEMENT_SWEEPS = 2


class PyDiapirDirectSolver(PyDiapirSolverBase):
    """Sparse LU with partial pivoting (SuperLU); deterministic"""

    method = "direct"

    def _solve(self, matrix, rhs, tol, max_iter):
        csc = matrix.tocsc()
        try:
            lu = splu(csc)
        except RuntimeError as exc:
            raise SolverBreakdown(f"sparse factorization failed: {exc}") from exc
        u = lu.solve(rhs)
        for _ in range(REFINEMENT_SWEEPS):
            if relative_residual(csc, u, rhs) <= tol:
                break
            u = u + lu.solve(rhs - csc @ u)
        return u, 0
