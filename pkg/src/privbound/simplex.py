"""Small dense linear programs in standard equality form.

``minimize c @ x  subject to  A @ x == b, x >= 0``

Two-phase tableau simplex with Bland's anti-cycling rule, plus brute-force
enumeration of basic feasible solutions for polytopes small enough to list.
Sizes here are tens of rows by a few hundred columns at most.
"""

from __future__ import annotations

import itertools
import math
from typing import NamedTuple

import numpy as np

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9


class LPError(RuntimeError):
    pass


class InfeasibleError(LPError):
    pass


class UnboundedError(LPError):
    pass


class TooManyBases(LPError):
    """Raised when vertex enumeration would exceed its combination budget."""


class LPResult(NamedTuple):
    x: np.ndarray
    fun: float
    basis: tuple
    pivots: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])


def _run(T: np.ndarray, basis: list, allowed: np.ndarray, max_pivots: int) -> int:
    """Optimize the tableau in place; last row holds reduced costs, last column the rhs."""
    m = T.shape[0] - 1
    pivots = 0
    while True:
        reduced = T[-1, :-1]
        candidates = np.flatnonzero((reduced < -PIVOT_TOL) & allowed)
        if candidates.size == 0:
            return pivots
        col = int(candidates[0])
        column = T[:m, col]
        pos = column > PIVOT_TOL
        if not np.any(pos):
            raise UnboundedError("objective is unbounded below")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        row = min(ties, key=lambda r: basis[r])
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
        if pivots > max_pivots:
            raise LPError("pivot limit reached")


def linprog_eq(c, A, b, max_pivots: int = 10_000) -> LPResult:
    """Solve ``min c@x, A@x = b, x >= 0``; raises on infeasible/unbounded."""
    c = np.asarray(c, dtype=float)
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # phase 1: artificials n..n+m-1
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    pivots = _run(T, basis, allowed, max_pivots)
    if -T[-1, -1] > FEAS_TOL * max(1.0, b.sum()):
        raise InfeasibleError(f"phase-1 residual {-T[-1, -1]:.3e}")

    # drive artificials out of the basis, dropping redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            nz = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
            if nz.size == 0:
                continue
            _pivot(T, r, int(nz[0]))
            basis[r] = int(nz[0])
        keep.append(r)
    T = np.vstack([T[keep], T[-1:]])
    basis = [basis[r] for r in keep]
    T = np.delete(T, np.s_[n:n + m], axis=1)

    # phase 2
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r, j in enumerate(basis):
        T[-1] -= c[j] * T[r]
    pivots += _run(T, basis, np.ones(n, dtype=bool), max_pivots)

    x = np.zeros(n)
    cols = list(basis)
    # re-solve on the final basis for accuracy
    sol, *_ = np.linalg.lstsq(A[:, cols], b, rcond=None)
    x[cols] = np.clip(sol, 0.0, None)
    if np.max(np.abs(A @ x - b)) > 1e-7:
        x[cols] = np.clip(T[:-1, -1], 0.0, None)
    return LPResult(x=x, fun=float(c @ x), basis=tuple(sorted(cols)), pivots=pivots)


def basic_feasible_solutions(A, b, max_bases: int = 50_000, tol: float = FEAS_TOL) -> list[np.ndarray]:
    """All vertices of ``{x >= 0 : A@x = b}`` by trying every column basis.

    Duplicates (degenerate vertices reached from several bases) are merged
    within ``tol``. Output order follows the lexicographic order of bases.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    rank = np.linalg.matrix_rank(A, tol=1e-10)
    if rank == 0:
        return [np.zeros(n)] if np.allclose(b, 0) else []
    total = math.comb(n, rank)
    if total > max_bases:
        raise TooManyBases(f"{total} candidate bases exceed budget {max_bases}")
    vertices: list[np.ndarray] = []
    for cols in itertools.combinations(range(n), rank):
        sub = A[:, cols]
        if np.linalg.matrix_rank(sub, tol=1e-10) < rank:
            continue
        sol, *_ = np.linalg.lstsq(sub, b, rcond=None)
        if np.min(sol) < -tol:
            continue
        x = np.zeros(n)
        x[list(cols)] = np.clip(sol, 0.0, None)
        if np.max(np.abs(A @ x - b)) > tol:
            continue
        if not any(np.max(np.abs(x - v)) <= tol for v in vertices):
            vertices.append(x)
    return vertices
