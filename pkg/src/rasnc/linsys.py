"""Dense least squares by column-pivoted QR."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, RankDeficientError

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class LeastSquaresProblem:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise InvalidArgumentError(f"A must be a non-empty matrix, got shape {A.shape}")
        if A.shape[0] != b.shape[0]:
            raise InvalidArgumentError(f"A has {A.shape[0]} rows but b has {b.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidArgumentError("least-squares inputs must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class LeastSquaresSolution:
    v: np.ndarray
    residual_norm: float
    rank: int


def solve_ls(problem: LeastSquaresProblem) -> LeastSquaresSolution:
    """Minimise ``||A v - b||_2``.

    Same minimiser as the normal equations ``(A^T A)^{-1} A^T b`` without
    squaring the condition number. Columns whose pivoted diagonal falls below
    ``1e-10 * ||A||_2`` count as dependent; any dependence raises
    :class:`RankDeficientError`.
    """
    A, b = problem.A, problem.b
    m, n = A.shape
    norm_a = np.linalg.norm(A, 2)
    if norm_a == 0.0:
        raise RankDeficientError(0, n)
    q, r, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.count_nonzero(diag > RANK_RTOL * norm_a))
    if rank < n:
        raise RankDeficientError(rank, n)
    y = scipy.linalg.solve_triangular(r, q.T @ b)
    v = np.empty(n)
    v[perm] = y
    return LeastSquaresSolution(v=v, residual_norm=float(np.linalg.norm(A @ v - b)), rank=rank)
