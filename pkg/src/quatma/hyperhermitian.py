"""Hyper-Hermitian quaternionic matrices and the Moore determinant.

The Moore determinant is evaluated through the complex embedding
``chi(A) = [[A1, A2], [-conj(A2), conj(A1)]]`` obtained by writing every
entry as ``a = z + w*j`` with ``z = t + x*sqrt(-1)`` and ``w = y + z*sqrt(-1)``.
For hyper-Hermitian ``A`` this is a complex Hermitian ``2n x 2n`` matrix whose
eigenvalues come in coincident pairs; the Moore determinant is the product
of one eigenvalue per pair.  The real embedding ``det(R(A)) = P(A)**4`` is kept
as an independent oracle.
"""
from __future__ import annotations

import numpy as np

from ._validation import check_hyperhermitian, check_quaternion_matrix
from .exceptions import PairingAmbiguous
from .quaternion import left_matrix, qconj, qmul

__all__ = [
    "HyperHermitianMatrix",
    "qmatmul",
    "qconj_transpose",
    "real_embedding",
    "complex_embedding",
    "moore_det",
    "moore_det_field",
    "real_embedding_oracle",
    "is_positive_definite",
    "random_hyperhermitian",
    "leading_minors",
    "segment_consistency",
]

PAIRING_RTOL = 1e-6


def _entries(A) -> np.ndarray:
    if isinstance(A, HyperHermitianMatrix):
        return A.entries
    return check_hyperhermitian(A)


class HyperHermitianMatrix:
    """An ``n x n`` quaternionic matrix with ``a_ji = conj(a_ij)``.

    Parameters
    ----------
    entries : array_like of shape (n, n, 4)
        Quaternion entries as ``(t, x, y, z)`` components.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        arr = check_hyperhermitian(entries).copy()
        # symmetrize away round-off so diagonal entries are exactly real
        arr = 0.5 * (arr + qconj(np.swapaxes(arr, 0, 1)))
        arr.setflags(write=False)
        self.entries = arr

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, n: int) -> "HyperHermitianMatrix":
        e = np.zeros((n, n, 4))
        e[np.arange(n), np.arange(n), 0] = 1.0
        return cls(e)

    @classmethod
    def diag(cls, values) -> "HyperHermitianMatrix":
        values = np.asarray(values, dtype=float)
        e = np.zeros((len(values), len(values), 4))
        e[np.arange(len(values)), np.arange(len(values)), 0] = values
        return cls(e)

    def __add__(self, other):
        if isinstance(other, HyperHermitianMatrix):
            return HyperHermitianMatrix(self.entries + other.entries)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, HyperHermitianMatrix):
            return HyperHermitianMatrix(self.entries - other.entries)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return HyperHermitianMatrix(self.entries * float(scalar))
        return NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"HyperHermitianMatrix(n={self.n})"

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def real_embedding(self) -> np.ndarray:
        return real_embedding(self.entries)

    def complex_embedding(self) -> np.ndarray:
        return complex_embedding(self.entries)

    def to_list(self):
        return self.entries.tolist()


def qmatmul(A, B) -> np.ndarray:
    """Product of quaternionic matrices given as (n, m, 4) and (m, p, 4) arrays."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return qmul(A[:, :, None, :], B[None, :, :, :]).sum(axis=1)


def qconj_transpose(A) -> np.ndarray:
    return qconj(np.swapaxes(np.asarray(A, dtype=float), 0, 1))


def real_embedding(A) -> np.ndarray:
    """The 4n x 4n real matrix of ``v -> A v`` on ``H^n`` (block ``(a, b)`` is ``L(a_ab)``)."""
    A = check_quaternion_matrix(A.entries if isinstance(A, HyperHermitianMatrix) else A)
    n = A.shape[0]
    blocks = left_matrix(A)  # (n, n, 4, 4)
    return blocks.transpose(0, 2, 1, 3).reshape(4 * n, 4 * n)


def complex_embedding(A) -> np.ndarray:
    A = check_quaternion_matrix(A.entries if isinstance(A, HyperHermitianMatrix) else A)
    z = A[..., 0] + 1j * A[..., 1]
    w = A[..., 2] + 1j * A[..., 3]
    return np.block([[z, w], [-w.conj(), z.conj()]])


def _paired_eigenvalues(entries: np.ndarray) -> np.ndarray:
    chi = complex_embedding(entries)
    ev = np.linalg.eigvalsh(chi)  # ascending
    scale = max(1.0, float(np.max(np.abs(ev)))) if ev.size else 1.0
    gap = np.abs(ev[0::2] - ev[1::2])
    if gap.size and gap.max() > PAIRING_RTOL * scale:
        raise PairingAmbiguous(
            f"eigenvalue pair mismatch {gap.max():.3e} exceeds {PAIRING_RTOL:.0e}*||A||"
        )
    return 0.5 * (ev[0::2] + ev[1::2])


def moore_det(A) -> float:
    """Moore determinant of a hyper-Hermitian matrix.

    Raises
    ------
    NotHyperHermitian
        If ``a_ji != conj(a_ij)`` beyond ``1e-10 * ||A||``.
    PairingAmbiguous
        If consecutive eigenvalues of the complex embedding fail to coincide.
    """
    entries = _entries(A)
    if entries.shape[0] == 0:
        return 1.0
    return float(np.prod(_paired_eigenvalues(entries)))


def moore_det_field(M: np.ndarray) -> np.ndarray:
    """Closed-form Moore determinant of a field ``(n, n, 4) + grid``, n in {1, 2}.

    ``det [[a, q], [conj q, c]] = a c - |q|^2``; no hyper-Hermitian check.
    """
    n = M.shape[0]
    if n == 1:
        return M[0, 0, 0].copy()
    if n == 2:
        return M[0, 0, 0] * M[1, 1, 0] - np.sum(M[0, 1] ** 2, axis=0)
    raise ValueError("closed form available for n <= 2 only")


def real_embedding_oracle(A) -> float:
    """``det`` of the real 4n x 4n embedding; equals ``moore_det(A)**4``."""
    entries = _entries(A)
    return float(np.linalg.det(real_embedding(entries)))


def is_positive_definite(A) -> bool:
    entries = _entries(A)
    return bool(np.all(np.linalg.eigvalsh(complex_embedding(entries)) > 0.0))


def min_eigenvalue(A) -> float:
    """Smallest (right) eigenvalue; positive iff ``A`` is positive definite."""
    entries = _entries(A)
    return float(np.linalg.eigvalsh(complex_embedding(entries))[0])


def random_hyperhermitian(n: int, seed: int, scale: float = 1.0) -> HyperHermitianMatrix:
    """Gaussian hyper-Hermitian matrix, deterministic in ``seed``.

    Off-diagonal entries are quaternion-Gaussian with per-component deviation
    ``scale``; diagonal entries are real Gaussian.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    e = np.zeros((n, n, 4))
    iu = np.triu_indices(n, 1)
    e[iu] = scale * rng.standard_normal((len(iu[0]), 4))
    e[iu[1], iu[0]] = qconj(e[iu])
    e[np.arange(n), np.arange(n), 0] = scale * rng.standard_normal(n)
    return HyperHermitianMatrix(e)


def random_positive_definite(n: int, seed: int, shift: float = 0.0) -> HyperHermitianMatrix:
    """``B B^*`` for a quaternion-Gaussian ``B``, plus ``shift * Id``."""
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n, 4))
    P = qmatmul(B, qconj_transpose(B))
    P[np.arange(n), np.arange(n), 0] += shift
    return HyperHermitianMatrix(P)


def leading_minors(A) -> list[float]:
    """Moore determinants of the leading principal submatrices."""
    entries = _entries(A)
    return [moore_det(entries[:k, :k]) for k in range(1, entries.shape[0] + 1)]


def segment_consistency(A, steps: int = 64) -> float:
    """Sign safeguard along ``(1-s) Id + s A``.

    Walks the segment and returns the largest deviation between
    ``|moore_det|`` and ``det(R(.))**(1/4)``, relative to ``max(1, |.|)``.  The
    sign of ``moore_det`` at ``s = 1`` is the one reached by continuity only
    if ``|P|`` and the oracle track each other along the path; a small return
    value certifies that.
    """
    entries = _entries(A)
    n = entries.shape[0]
    eye = HyperHermitianMatrix.identity(n).entries
    worst = 0.0
    for s in np.linspace(0.0, 1.0, steps + 1):
        M = (1.0 - s) * eye + s * entries
        p = moore_det(M)
        r = max(real_embedding_oracle(M), 0.0) ** 0.25
        worst = max(worst, abs(abs(p) - r) / max(1.0, abs(p)))
    return worst
