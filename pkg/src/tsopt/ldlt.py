"""Unpivoted LDL^T factorization, generic over the scalar type.

The assembled systems are small perturbations of real SPD matrices, so an
unpivoted symmetric factorization is stable; it is written against the
minimal array interface shared by float/complex ndarrays and
:class:`~tsopt.hdarray.HyperDualArray`, which keeps one solve path for
ordinary, complex-step and hyper-dual evaluation.  Complex systems are
treated as complex-symmetric (no conjugation anywhere).
"""

from __future__ import annotations

import numpy as np

from .hdarray import generic_zeros, real_part

__all__ = ["SolverBreakdown", "ldlt_factor", "ldlt_solve", "solve_symmetric"]

_PIVOT_RTOL = 1e-14


class SolverBreakdown(ArithmeticError):
    """An unpivoted pivot with (near-)zero real part was encountered."""


def ldlt_factor(a):
    """Factor a symmetric matrix as ``L D L^T`` (unit lower triangular L).

    Returns ``(L, d)`` with the strict lower triangle of ``L`` stored in a
    copy of ``a`` and the diagonal in ``d``.  Raises
    :class:`SolverBreakdown` when a pivot's real part falls below
    ``1e-14`` times the matrix scale.
    """
    n = a.shape[0]
    lower = a.copy()
    d = generic_zeros(n, like=a)
    scale = float(np.max(np.abs(real_part(a))))
    if scale == 0.0:
        raise SolverBreakdown("zero matrix")
    for j in range(n):
        w = lower[j, :j] * d[:j]
        pivot = lower[j, j] - (lower[j, :j] * w).sum()
        if abs(float(real_part(pivot))) < _PIVOT_RTOL * scale:
            raise SolverBreakdown(f"pivot {j} has vanishing real part")
        d[j] = pivot
        if j + 1 < n:
            lower[j + 1:, j] = (lower[j + 1:, j] - lower[j + 1:, :j] @ w) / pivot
    return lower, d


def ldlt_solve(lower, d, b):
    """Solve ``L D L^T x = b`` from a prior :func:`ldlt_factor`."""
    n = lower.shape[0]
    x = b.copy()
    for j in range(n - 1):
        x[j + 1:] = x[j + 1:] - lower[j + 1:, j] * x[j]
    x = x / d
    for j in range(n - 2, -1, -1):
        x[j] = x[j] - (lower[j + 1:, j] * x[j + 1:]).sum()
    return x


def solve_symmetric(a, b):
    """One-shot symmetric solve (factor + substitute)."""
    lower, d = ldlt_factor(a)
    return ldlt_solve(lower, d, b)
