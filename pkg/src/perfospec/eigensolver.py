"""Smallest eigenpairs of K v = lambda M v by shift-invert block Lanczos at sigma = 0.

The stiffness is factored once.  Krylov blocks for S = K^{-1} M are kept
M-orthonormal with two passes of classical Gram-Schmidt against the whole
basis; Ritz values theta of S give lambda = 1/theta.  A block of three
vectors resolves eigenvalues of multiplicity up to three, which covers the
exactly degenerate pairs on squares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import FactorizationFailure, NoConvergence
from .fem import DiscreteField, DiscreteOperator

BLOCK = 3


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # (n_free, k), mass-orthonormal columns
    residuals: np.ndarray
    operator: DiscreteOperator
    iterations: int = 0

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def field(self, i: int) -> DiscreteField:
        return DiscreteField(self.vectors[:, i], self.operator)

    @property
    def fields(self) -> list[DiscreteField]:
        return [self.field(i) for i in range(self.k)]

    def orthonormality_defect(self) -> float:
        V = self.vectors
        G = V.T @ (self.operator.mass @ V)
        return float(np.max(np.abs(G - np.eye(self.k))))


def residual(op: DiscreteOperator, lam: float, v) -> float:
    """||A v - lam B v|| / ||B v||."""
    x = v.coefficients if isinstance(v, DiscreteField) else np.asarray(v, dtype=float)
    Bv = op.mass @ x
    return float(np.linalg.norm(op.stiffness @ x - lam * Bv) / np.linalg.norm(Bv))


def factorize(A: sp.spmatrix):
    """Sparse symmetric factorization; raises if a pivot is not positive."""
    A = sp.csc_matrix(A)
    try:
        lu = splu(
            A,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:
        raise FactorizationFailure(f"stiffness is singular: {exc}") from exc
    d = lu.U.diagonal()
    if not np.all(d > 0) or not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationFailure("stiffness is not symmetric positive definite (check Dirichlet elimination)")
    return lu


def start_block(n: int, b: int) -> np.ndarray:
    """All-ones column plus deterministic cosine columns."""
    i = np.arange(n, dtype=float)
    cols = [np.ones(n)]
    for j in range(1, b):
        cols.append(np.cos(0.7 * j + (1.0 + 0.618 * j) * i))
    return np.column_stack(cols)


def _fix_sign(x: np.ndarray, Bx: np.ndarray) -> np.ndarray:
    s = Bx.sum()
    if abs(s) <= 1e-12 * np.abs(Bx).sum():
        s = x[np.argmax(np.abs(x))]
    return -x if s < 0 else x


def smallest_eigenpairs(
    op: DiscreteOperator,
    k: int,
    tol: float = 1e-8,
    max_iter: int = 200,
    block: int = BLOCK,
) -> Spectrum:
    """The ``k`` smallest eigenpairs with residual ||Av - lam Bv|| / ||Bv|| <= tol."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if not 0 < tol <= 1e-4:
        raise ValueError("tol must lie in (0, 1e-4]")
    A, B = op.stiffness, op.mass
    n = A.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the number of free dofs ({n})")
    lu = factorize(A)
    b = min(block, n)
    cap = min(n, b * (max_iter + 1))
    V = np.zeros((n, cap))
    BV = np.zeros((n, cap))
    m = 0

    def add_columns(W: np.ndarray) -> int:
        nonlocal m
        added = 0
        for w in W.T:
            w = w.copy()
            ref = np.sqrt(max(w @ (B @ w), 0.0))
            if ref == 0.0:
                continue
            for _ in range(2):
                w -= V[:, :m] @ (BV[:, :m].T @ w)
            Bw = B @ w
            nrm = np.sqrt(max(w @ Bw, 0.0))
            if nrm <= 1e-10 * ref or m >= cap:
                continue
            V[:, m] = w / nrm
            BV[:, m] = Bw / nrm
            m += 1
            added += 1
        return added

    add_columns(start_block(n, b))
    # H = V^T B S V, one block column at a time
    H = np.zeros((cap, cap))
    done = 0
    best = None
    for it in range(1, max_iter + 1):
        lo, hi = done, m
        if lo == hi:
            break
        W = lu.solve(BV[:, lo:hi])
        H[:m, lo:hi] = BV[:, :m].T @ W
        before = m
        add_columns(W)
        if m > before:
            H[before:m, lo:hi] = BV[:, before:m].T @ W
        done = hi
        Hs = H[:done, :done]
        Hs = 0.5 * (Hs + Hs.T)
        if done < k:
            continue
        theta, Y = la.eigh(Hs)
        order = np.argsort(theta)[::-1][:k]
        theta, Y = theta[order], Y[:, order]
        if np.any(theta <= 0):
            continue
        lam = 1.0 / theta
        X = V[:, :done] @ Y
        BX = B @ X
        res = np.linalg.norm(A @ X - BX * lam, axis=0) / np.linalg.norm(BX, axis=0)
        best = (lam, X, BX, res, it)
        if np.all(res <= tol) or done == n:
            break
        if m == done and m < n:
            # invariant subspace found early: restart with a fresh direction
            if add_columns(start_block(n, b + 1)[:, -1:]) == 0:
                break
    if best is None or not np.all(best[3] <= tol):
        worst = None if best is None else float(best[3].max())
        raise NoConvergence(f"no convergence after {max_iter} iterations (worst residual {worst})")
    lam, X, BX, res, it = best
    idx = np.argsort(lam, kind="stable")
    lam, X, BX, res = lam[idx], X[:, idx], BX[:, idx], res[idx]
    for j in range(k):
        X[:, j] = _fix_sign(X[:, j], BX[:, j])
    return Spectrum(lam, X, res, op, it)


def dense_eigenpairs(op: DiscreteOperator, k: int):
    """Dense generalized symmetric solve; an independent check for small systems."""
    lam, X = la.eigh(op.stiffness.toarray(), op.mass.toarray())
    return lam[:k], X[:, :k]


__all__ = ["Spectrum", "smallest_eigenpairs", "residual", "factorize", "dense_eigenpairs"]
