import logging

from scipy.sparse.linalg import LinearOperator, gmres, spilu

from pydiapir.decorators import experimental_path
from pydiapir.solver.exceptions import NoConvergence, SolverBreakdown
from pydiapir.solver.solver_base import PyDiapirSolverBase

log = logging.getLogger(__name__)

ILU_DROP_TOL = 1e-5
ILU_FILL_FACTOR = 20
RESTART = 100


class PyDiapirKrylovSolver(PyDiapirSolverBase):
    """Restarted GMRES preconditioned with an incomplete LU factorization"""

    method = "krylov"

    @experimental_path
    def _solve(self, matrix, rhs, tol, max_iter):
        csc = matrix.tocsc()
        try:
            ilu = spilu(csc, drop_tol=ILU_DROP_TOL, fill_factor=ILU_FILL_FACTOR)
        except RuntimeError as exc:
            raise SolverBreakdown(f"incomplete factorization failed: {exc}") from exc
        preconditioner = LinearOperator(csc.shape, matvec=ilu.solve, dtype=csc.dtype)
        iterations = [0]

        def count(_):
            iterations[0] += 1

        # GMRES stops on the preconditioned-free relative residual; keep a margin
        # below the contract checked by the base class
        u, info = gmres(csc, rhs, rtol=0.1 * tol, atol=0.0, restart=RESTART, maxiter=max_iter,
                        M=preconditioner, callback=count, callback_type='pr_norm')
        if info > 0:
            raise NoConvergence(f"GMRES did not converge in {max_iter} restarts ({iterations[0]} iterations)")
        if info < 0:
            raise SolverBreakdown(f"GMRES breakdown (info={info})")
        return u, iterations[0]
