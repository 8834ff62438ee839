"""Sparse symmetric direct solves with inertia reporting."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

try:
    import qdldl
except ImportError:  # pragma: no cover
    qdldl = None


class SingularMatrixError(RuntimeError):
    pass


class Factorization:
    """LDL^T factorization of a symmetric matrix.

    ``inertia`` is the number of negative pivots, which equals the number of
    negative eigenvalues by Sylvester's law.  It is ``None`` when only the LU
    fallback was available.
    """

    def __init__(self, K, backend: str = "auto"):
        K = sp.csc_matrix(K)
        if K.shape[0] != K.shape[1]:
            raise ValueError("matrix must be square")
        self.n = K.shape[0]
        self.inertia = None
        if backend not in ("auto", "qdldl", "splu"):
            raise ValueError(f"unknown backend {backend!r}")
        if backend != "splu" and qdldl is not None:
            try:
                self._solver = qdldl.Solver(sp.triu(K, format="csc"))
            except RuntimeError as exc:
                raise SingularMatrixError(str(exc)) from exc
            d = self._solver.factors()[1]
            if not np.all(np.isfinite(d)):
                raise SingularMatrixError("non-finite pivot")
            self.inertia = int(np.count_nonzero(d < 0))
            self.min_pivot = float(np.min(np.abs(d))) if d.size else np.inf
            self.backend = "qdldl"
        else:
            try:
                self._solver = spla.splu(K)
            except RuntimeError as exc:
                raise SingularMatrixError(str(exc)) from exc
            self.min_pivot = float(np.min(np.abs(self._solver.U.diagonal())))
            self.backend = "splu"

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._solver.solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("solution is not finite")
        return x


def linear_solve(K, rhs, backend: str = "auto"):
    """Solve ``K x = rhs``; returns ``(x, inertia)``."""
    fac = Factorization(K, backend)
    return fac.solve(rhs), fac.inertia
