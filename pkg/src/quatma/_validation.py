"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import numpy as np

from .exceptions import GridTooCoarse, NotHyperHermitian, NotSymmetric


def check_quaternion_matrix(entries) -> np.ndarray:
    arr = np.asarray(entries, dtype=float)
    if arr.ndim != 3 or arr.shape[0] != arr.shape[1] or arr.shape[2] != 4:
        raise ValueError(f"expected an (n, n, 4) quaternion array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("quaternion matrix contains non-finite entries")
    return arr


def check_hyperhermitian(entries, rtol: float = 1e-10) -> np.ndarray:
    """Return ``entries`` as an (n, n, 4) array, raising unless ``a_ji = conj(a_ij)``."""
    arr = check_quaternion_matrix(entries)
    conj_t = np.swapaxes(arr, 0, 1) * np.array([1.0, -1.0, -1.0, -1.0])
    scale = max(1.0, float(np.linalg.norm(arr)))
    err = float(np.max(np.abs(arr - conj_t))) if arr.size else 0.0
    if err > rtol * scale:
        raise NotHyperHermitian(
            f"a_ji != conj(a_ij): max deviation {err:.3e} exceeds {rtol:.1e}*||A||"
        )
    return arr


def check_symmetric(S, n: int | None = None, rtol: float = 1e-10) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 4:
        raise NotSymmetric(f"expected a square 4n x 4n matrix, got shape {S.shape}")
    if n is not None and S.shape[0] != 4 * n:
        raise NotSymmetric(f"expected size {4 * n}, got {S.shape[0]}")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if S.size and np.max(np.abs(S - S.T)) > rtol * scale:
        raise NotSymmetric("quadratic form matrix is not symmetric")
    return S


def check_grid(N: int, minimum: int = 4) -> int:
    if int(N) != N or N < minimum:
        raise GridTooCoarse(f"grid resolution N={N} is below the minimum {minimum}")
    return int(N)
