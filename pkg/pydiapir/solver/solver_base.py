import abc
import logging
from dataclasses import dataclass

import numpy as np

from pydiapir.exceptions import ValidationError
from pydiapir.solver.exceptions import SolverBreakdown

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveReport:
    residual_norm: float  # ||A u - b|| / ||b||
    iterations: int       # 0 for direct
    method: str


def relative_residual(matrix, u, b):
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return float(np.linalg.norm(matrix @ u))
    return float(np.linalg.norm(matrix @ u - b) / bnorm)


class PyDiapirSolverBase:

    method = None

    def __init__(self, tol: float = 1e-6, max_iter: int = 500):
        super().__init__()
        self.tol = tol
        self.max_iter = max_iter

    @abc.abstractmethod
    def _solve(self, matrix, rhs, tol, max_iter):
        """Return (u, iterations)"""
        raise NotImplementedError

    def solve(self, system, tol=None, max_iter=None):
        """
        Solve the assembled system for the free-dof displacement

        Args:
            system   = SparseSystem
            tol      = relative residual bound (default: solver tol)
            max_iter = iteration cap for iterative methods (default: solver max_iter)
        """
        tol = self.tol if tol is None else tol
        max_iter = self.max_iter if max_iter is None else max_iter
        if not tol > 0:
            raise ValidationError("tol must be positive")
        matrix, rhs = system.matrix, np.asarray(system.rhs, dtype=np.float64)
        if matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != rhs.shape[0]:
            raise SolverBreakdown(f"inconsistent system shapes {matrix.shape} and {rhs.shape}")
        if not np.any(rhs):
            log.debug(f' -- {self.method}: zero right-hand side')
            return np.zeros_like(rhs), SolveReport(residual_norm=0.0, iterations=0, method=self.method)
        u, iterations = self._solve(matrix, rhs, tol, max_iter)
        if not np.all(np.isfinite(u)):
            raise SolverBreakdown(f"{self.method} solve produced non-finite values")
        residual = relative_residual(matrix, u, rhs)
        log.debug(f' -- {self.method}: {system.size} dofs, residual {residual:.3e}, {iterations} iterations')
        if residual > tol:
            raise SolverBreakdown(f"{self.method} residual {residual:.3e} exceeds tolerance {tol:.1e}")
        return u, SolveReport(residual_norm=residual, iterations=iterations, method=self.method)
