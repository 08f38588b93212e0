"""
Sparse Solver Service
Linear solves, weakly chained diagonal dominance certificates and spectral
norm estimates
"""

import time
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .assembly_service import SparseSystem
from ..utils.config import settings
from ..utils.errors import SolverError
from ..utils.logger import get_logger, log_error, log_solve

logger = get_logger(__name__)

MatrixLike = Union[sp.spmatrix, np.ndarray]


class SolveMethod(str, Enum):
    DIRECT = "direct"
    BICGSTAB = "bicgstab"


class NormMode(str, Enum):
    DIRECT = "direct"
    INVERSE = "inverse"


@dataclass
class SolveReport:
    """Solution with residual ||Ax - b|| / ||b|| and solve metadata"""
    solution: np.ndarray
    residual_norm: float
    iterations: int
    method: SolveMethod
    duration: float = 0.0


@dataclass
class WcddCertificate:
    """
    Diagonal dominance certificate.

    next_hop[r] is the successor of row r on its witness chain (a column with
    a nonzero entry in row r), -1 for SDD rows and unreachable rows.
    """
    is_wdd: bool
    sdd_rows: np.ndarray
    next_hop: np.ndarray
    reachable: np.ndarray

    @property
    def is_wcdd(self) -> bool:
        return bool(self.is_wdd and self.sdd_rows.size > 0 and self.reachable.all())

    def chain(self, row: int) -> Optional[List[int]]:
        """Witness path from row to an SDD row, or None when no chain exists"""
        if not self.reachable[row]:
            return None
        path = [int(row)]
        while self.next_hop[path[-1]] >= 0:
            path.append(int(self.next_hop[path[-1]]))
        return path

    @property
    def chains(self) -> Dict[int, Optional[List[int]]]:
        sdd = np.zeros(self.reachable.size, dtype=bool)
        sdd[self.sdd_rows] = True
        return {int(r): self.chain(r) for r in np.flatnonzero(~sdd)}


def _as_csr(A: MatrixLike) -> sp.csr_matrix:
    if isinstance(A, SparseSystem):
        return A.matrix
    if sp.issparse(A):
        return A.tocsr()
    return sp.csr_matrix(np.atleast_2d(np.asarray(A, dtype=float)))


class SolverService:
    """
    Service class for sparse linear algebra
    Direct factorization up to DIRECT_SOLVER_MAX_UNKNOWNS, Jacobi-preconditioned
    BiCGSTAB above
    """

    def __init__(self):
        """Initialize Solver Service"""
        self.tol = settings.SOLVER_TOL
        self.direct_max = settings.DIRECT_SOLVER_MAX_UNKNOWNS
        logger.debug(f"Solver Service initialized | tol={self.tol:g} | direct_max={self.direct_max}")

    def factorize(self, A: MatrixLike) -> spla.SuperLU:
        """SuperLU factorization; raises SolverError when singular"""
        try:
            return spla.splu(_as_csr(A).tocsc())
        except RuntimeError as e:
            raise SolverError(f"Matrix is singular: {e}") from e

    def solve_sparse(
        self,
        A: Union[SparseSystem, MatrixLike],
        b: Optional[np.ndarray] = None,
        tol: Optional[float] = None,
        method: Optional[Union[SolveMethod, str]] = None,
    ) -> SolveReport:
        """
        Solve Ax = b

        Args:
            A: SparseSystem (its rhs is used when b is omitted) or matrix
            b: Right-hand side
            tol: Relative residual tolerance (settings.SOLVER_TOL when omitted)
            method: Force direct or bicgstab

        Returns:
            SolveReport; raises SolverError on singularity, non-convergence or
            residual above tol
        """
        tol = self.tol if tol is None else tol
        if b is None:
            if not isinstance(A, SparseSystem):
                raise SolverError("Right-hand side required for a bare matrix")
            b = A.rhs
        matrix = _as_csr(A)
        b = np.asarray(b, dtype=float).ravel()
        n = matrix.shape[0]
        if matrix.shape[0] != matrix.shape[1]:
            raise SolverError(f"Matrix must be square, got {matrix.shape}")
        if b.shape != (n,):
            raise SolverError(f"Right-hand side has length {b.size}, expected {n}")

        if method is None:
            method = SolveMethod.DIRECT if n <= self.direct_max else SolveMethod.BICGSTAB
        method = SolveMethod(method)

        start = time.time()
        try:
            if method == SolveMethod.DIRECT:
                x = self.factorize(matrix).solve(b)
                iterations = 0
            else:
                x, iterations = self._bicgstab(matrix, b, tol)
        except SolverError as e:
            log_error(e, "solve_sparse")
            raise

        if not np.isfinite(x).all():
            raise SolverError("Solution contains non-finite values (matrix numerically singular)")

        b_norm = np.linalg.norm(b)
        residual = float(np.linalg.norm(matrix @ x - b) / (b_norm if b_norm > 0 else 1.0))
        duration = time.time() - start
        log_solve(method.value, n, residual, duration, iterations)
        if residual > tol:
            raise SolverError(f"Relative residual {residual:.3e} exceeds tolerance {tol:.1e} ({method.value})")
        return SolveReport(x, residual, iterations, method, duration)

    def _bicgstab(self, matrix: sp.csr_matrix, b: np.ndarray, tol: float):
        diag = matrix.diagonal()
        if np.any(diag == 0):
            raise SolverError("Jacobi preconditioner needs a nonzero diagonal")
        inv_diag = 1.0 / diag
        preconditioner = spla.LinearOperator(matrix.shape, matvec=lambda v: inv_diag * v)
        counter = {"iterations": 0}

        def _count(_):
            counter["iterations"] += 1

        x, info = spla.bicgstab(
            matrix, b, rtol=tol, atol=0.0, maxiter=settings.ITERATIVE_MAX_ITER,
            M=preconditioner, callback=_count,
        )
        if info > 0:
            raise SolverError(f"BiCGSTAB did not converge in {info} iterations")
        if info < 0:
            raise SolverError(f"BiCGSTAB breakdown (info={info})")
        return x, counter["iterations"]

    def is_wcdd(self, A: MatrixLike) -> WcddCertificate:
        """
        Weakly chained diagonal dominance test

        Every row must be weakly diagonally dominant and every row that is not
        strictly dominant must reach a strictly dominant row along nonzero
        entries. Reachability is a breadth-first search from the SDD rows on
        the reversed sparsity graph.
        """
        matrix = _as_csr(A)
        n = matrix.shape[0]
        rtol = settings.WCDD_RTOL
        diag = np.abs(matrix.diagonal())
        off = np.asarray(abs(matrix).sum(axis=1)).ravel() - diag
        is_wdd = bool(np.all(off <= diag * (1.0 + rtol)))
        sdd = off < diag * (1.0 - rtol)
        sdd_rows = np.flatnonzero(sdd)

        pattern = matrix.copy()
        pattern.setdiag(0)
        pattern.eliminate_zeros()
        pattern.data = np.ones_like(pattern.data)
        reversed_graph = pattern.T.tocsr()
        hub = sp.csr_matrix((np.ones(sdd_rows.size), (np.full(sdd_rows.size, n), sdd_rows)), shape=(n + 1, n + 1))
        graph = sp.bmat([[reversed_graph, None], [None, sp.csr_matrix((1, 1))]]).tocsr() + hub

        _, predecessors = csgraph.breadth_first_order(graph, n, directed=True, return_predecessors=True)
        predecessors = predecessors[:n]
        reachable = predecessors >= 0
        next_hop = np.where(reachable & (predecessors != n), predecessors, -1)

        certificate = WcddCertificate(is_wdd, sdd_rows, next_hop, reachable)
        logger.debug(
            f"WCDD: n={n} | wdd={is_wdd} | sdd_rows={sdd_rows.size} | unreached={int((~reachable).sum())}"
        )
        return certificate

    def norm2_estimate(
        self,
        A: MatrixLike,
        mode: Union[NormMode, str] = NormMode.DIRECT,
        tol: Optional[float] = None,
    ) -> float:
        """
        Spectral norm of A (direct) or of A^-1 (inverse) by power iteration on A^T A

        The start vector is the normalized all-ones vector. Iteration stops when
        successive estimates differ by less than tol times the estimate.
        """
        mode = NormMode(mode)
        tol = settings.NORM_EST_TOL if tol is None else tol
        matrix = _as_csr(A)
        n = matrix.shape[1]

        if mode == NormMode.DIRECT:
            def apply(v):
                return matrix.T @ (matrix @ v)
        else:
            lu = self.factorize(matrix)

            def apply(v):
                return lu.solve(lu.solve(v), trans="T")

        v = np.ones(n) / np.sqrt(n)
        estimate = 0.0
        for iteration in range(1, settings.POWER_ITER_MAX + 1):
            z = apply(v)
            z_norm = np.linalg.norm(z)
            if z_norm == 0.0:
                return 0.0
            previous, estimate = estimate, float(np.sqrt(z_norm))
            if not np.isfinite(estimate):
                raise SolverError("Power iteration produced a non-finite estimate")
            v = z / z_norm
            if abs(estimate - previous) < tol * estimate:
                logger.debug(f"Norm estimate: {mode.value} | {estimate:.6g} | iterations={iteration}")
                return estimate
        raise SolverError(f"Power iteration did not converge in {settings.POWER_ITER_MAX} iterations")


# Singleton instance
_solver_service = None


def get_solver_service() -> SolverService:
    """Get or create solver service singleton"""
    global _solver_service
    if _solver_service is None:
        _solver_service = SolverService()
    return _solver_service
