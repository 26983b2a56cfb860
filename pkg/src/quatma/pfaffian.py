"""Pfaffian of a skew-symmetric matrix by pivoted Parlett-Reid elimination."""
from __future__ import annotations

import numpy as np

__all__ = ["pfaffian"]


def pfaffian(M):
    """Pfaffian of a real or complex skew-symmetric matrix.

    Normalized so that the standard symplectic block ``[[0, 1], [-1, 0]]``
    (repeated on the diagonal) has Pfaffian ``+1``.  Uses the skew ``L T L^T``
    reduction with partial pivoting, O(n^3).
    """
    A = np.array(M, dtype=complex if np.iscomplexobj(M) else float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    scale = max(1.0, float(np.max(np.abs(A)))) if n else 1.0
    if n and np.max(np.abs(A + A.T)) > 1e-10 * scale:
        raise ValueError("matrix is not skew-symmetric")
    if n % 2:
        return A.dtype.type(0)
    pf = A.dtype.type(1)
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1 :, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0:
            return A.dtype.type(0)
        pf = pf * A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2 :] / A[k, k + 1]
            col = A[k + 2 :, k + 1].copy()
            A[k + 2 :, k + 2 :] += np.outer(tau, col) - np.outer(col, tau)
    return pf
