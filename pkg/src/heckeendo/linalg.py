"""
Exact linear algebra over F_p (numpy int64) and over Z (Python ints).

Matrices over F_p are ``np.ndarray`` of dtype int64 with entries in
``[0, p)``; integer matrices use dtype ``object`` so entries are bignums.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

__all__ = [
    "rref_mod", "nullspace_mod", "rank_mod", "row_space_mod", "matmul_mod",
    "nullspace_int", "is_prime",
]


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    f = 2
    while f * f <= p:
        if p % f == 0:
            return False
        f += 1
    return True


def matmul_mod(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64) % p
    b = np.asarray(b, dtype=np.int64) % p
    inner = a.shape[-1] if a.ndim else 1
    if inner * (p - 1) ** 2 < 2 ** 52:
        # float64 sums of products below 2^53 are exact; this path uses BLAS
        return (a.astype(np.float64) @ b.astype(np.float64)).astype(np.int64) % p
    return (a @ b) % p


def rref_mod(M: np.ndarray, p: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over F_p; returns (nonzero rows, pivot columns)."""
    if p == 2:
        return _rref_gf2(M)
    A = np.array(M, dtype=np.int64) % p
    if A.ndim != 2:
        raise ValueError("expected a 2-d array")
    rows, cols = A.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(A[r:, c])
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        inv = pow(int(A[r, c]), -1, p)
        if inv != 1:
            A[r, c:] = (A[r, c:] * inv) % p
        col = A[:, c].copy()
        col[r] = 0
        nzr = np.flatnonzero(col)
        if nzr.size:
            A[nzr, c:] = (A[nzr, c:] - np.outer(col[nzr], A[r, c:])) % p
        pivots.append(c)
        r += 1
    return A[:r], pivots


def _rref_gf2(M: np.ndarray) -> tuple[np.ndarray, list[int]]:
    A = (np.array(M, dtype=np.int64) % 2).astype(np.uint8)
    if A.ndim != 2:
        raise ValueError("expected a 2-d array")
    rows, cols = A.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(A[r:, c])
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        col = A[:, c].copy()
        col[r] = 0
        nzr = np.flatnonzero(col)
        if nzr.size:
            A[nzr, c:] ^= A[r, c:]
        pivots.append(c)
        r += 1
    return A[:r].astype(np.int64), pivots


def rank_mod(M: np.ndarray, p: int) -> int:
    if M.size == 0:
        return 0
    return len(rref_mod(M, p)[1])


def nullspace_mod(M: np.ndarray, p: int) -> np.ndarray:
    """Basis of ``{x : M x = 0}`` over F_p as the columns of an (n, k) array."""
    n = M.shape[1]
    if M.shape[0] == 0 or n == 0:
        return np.eye(n, dtype=np.int64)
    R, pivots = rref_mod(M, p)
    free = [c for c in range(n) if c not in set(pivots)]
    K = np.zeros((n, len(free)), dtype=np.int64)
    for k, f in enumerate(free):
        K[f, k] = 1
        for i, c in enumerate(pivots):
            K[c, k] = (-R[i, f]) % p
    return K


def row_space_mod(M: np.ndarray, p: int) -> np.ndarray:
    """Echelonized basis (as rows) of the row space of M over F_p."""
    if M.size == 0:
        return np.zeros((0, M.shape[1] if M.ndim == 2 else 0), dtype=np.int64)
    return rref_mod(M, p)[0]


def _rref_rational(rows: list[list[int]], n: int):
    A = [[Fraction(x) for x in row] for row in rows if any(row)]
    pivots = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, len(A)) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        lead = A[r][c]
        A[r] = [x / lead for x in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [x - f * y for x, y in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == len(A):
            break
    return A[:r], pivots


def _nullspace_int_hnf(rows: list[list[int]], n: int) -> list[list[int]]:
    # unimodular column reduction: columns of U beyond the pivots span ker_Z
    cols = [[row[c] for row in rows] for c in range(n)]
    U = [[1 if i == c else 0 for i in range(n)] for c in range(n)]
    k = 0
    for r in range(len(rows)):
        while True:
            live = [c for c in range(k, n) if cols[c][r] != 0]
            if not live:
                break
            c0 = min(live, key=lambda c: abs(cols[c][r]))
            cols[k], cols[c0] = cols[c0], cols[k]
            U[k], U[c0] = U[c0], U[k]
            done = True
            for c in range(k + 1, n):
                if cols[c][r]:
                    q = cols[c][r] // cols[k][r]
                    cols[c] = [x - q * y for x, y in zip(cols[c], cols[k])]
                    U[c] = [x - q * y for x, y in zip(U[c], U[k])]
                    if cols[c][r]:
                        done = False
            if done:
                k += 1
                break
    return [U[c] for c in range(k, n)]


def nullspace_int(M) -> np.ndarray:
    """
    A Z-basis of ``ker(M) ∩ Z^n`` as columns of an object array.

    Uses the rational RREF when it is integral (then its standard kernel
    basis is already a Z-basis); falls back to unimodular column reduction.
    """
    M = np.asarray(M, dtype=object)
    n = M.shape[1]
    rows = [[int(x) for x in row] for row in M]
    R, pivots = _rref_rational(rows, n)
    if all(x.denominator == 1 for row in R for x in row):
        free = [c for c in range(n) if c not in set(pivots)]
        K = np.zeros((n, len(free)), dtype=object)
        for k, f in enumerate(free):
            K[f, k] = 1
            for i, c in enumerate(pivots):
                K[c, k] = -int(R[i][f])
        return K
    basis = _nullspace_int_hnf(rows, n)
    K = np.zeros((n, len(basis)), dtype=object)
    for k, v in enumerate(basis):
        K[:, k] = v
    return K
