"""Quaternion algebra, the right H-action on H^n, and Haar sampling on SU(2).

Conventions
-----------
A quaternion is ``q = t + x*i + y*j + z*k`` with ``i*j = k``, ``j*i = -k`` and
``i**2 = j**2 = k**2 = -1``.  Arrays of quaternions carry the four real
components ``(t, x, y, z)`` on their last axis.

Vectors of ``H^n`` form a *right* H-module: the complex structures ``I, J, K``
act on a vector ``v`` by right multiplication ``v -> v*i, v*j, v*k``.  Every
other module inherits this choice.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import qmc

__all__ = [
    "Quaternion",
    "ImaginaryDirection",
    "qmul",
    "qconj",
    "qnorm",
    "left_matrix",
    "right_matrix",
    "right_act",
    "haar_sample_su2",
    "UNITS",
]

_CONJ_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])

#: The real basis 1, i, j, k as rows.
UNITS = np.eye(4)


def qmul(a, b):
    """Hamilton product of quaternion arrays, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t1, x1, y1, z1 = np.moveaxis(a, -1, 0)
    t2, x2, y2, z2 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            t1 * t2 - x1 * x2 - y1 * y2 - z1 * z2,
            t1 * x2 + x1 * t2 + y1 * z2 - z1 * y2,
            t1 * y2 - x1 * z2 + y1 * t2 + z1 * x2,
            t1 * z2 + x1 * y2 - y1 * x2 + z1 * t2,
        ],
        axis=-1,
    )


def qconj(a):
    return np.asarray(a, dtype=float) * _CONJ_SIGNS


def qnorm(a):
    return np.linalg.norm(np.asarray(a, dtype=float), axis=-1)


def left_matrix(q):
    """Real 4x4 matrix of ``p -> q*p``."""
    q = np.asarray(q, dtype=float)
    return np.stack([qmul(q, e) for e in UNITS], axis=-1)


def right_matrix(q):
    """Real 4x4 matrix of ``p -> p*q``."""
    q = np.asarray(q, dtype=float)
    return np.stack([qmul(e, q) for e in UNITS], axis=-1)


@dataclass(frozen=True)
class Quaternion:
    t: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        t, x, y, z = (float(c) for c in np.asarray(arr, dtype=float).reshape(4))
        return cls(t, x, y, z)

    def to_array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z])

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion.from_array(qmul(self.to_array(), other.to_array()))
        if np.isscalar(other):
            return Quaternion.from_array(self.to_array() * float(other))
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return Quaternion.from_array(self.to_array() * float(other))
        return NotImplemented

    def __add__(self, other):
        if not isinstance(other, Quaternion):
            return NotImplemented
        return Quaternion.from_array(self.to_array() + other.to_array())

    def __sub__(self, other):
        if not isinstance(other, Quaternion):
            return NotImplemented
        return Quaternion.from_array(self.to_array() - other.to_array())

    def __neg__(self):
        return Quaternion(-self.t, -self.x, -self.y, -self.z)

    def conj(self) -> "Quaternion":
        return Quaternion(self.t, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_array()))

    def inverse(self) -> "Quaternion":
        n2 = self.norm() ** 2
        if n2 == 0.0:
            raise ZeroDivisionError("zero quaternion has no inverse")
        return self.conj() * (1.0 / n2)

    def isclose(self, other: "Quaternion", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.to_array(), other.to_array(), rtol=0.0, atol=atol))


Quaternion.ONE = Quaternion(1.0)
Quaternion.I = Quaternion(0.0, 1.0)
Quaternion.J = Quaternion(0.0, 0.0, 1.0)
Quaternion.K = Quaternion(0.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class ImaginaryDirection:
    """Unit imaginary quaternion ``a1*i + a2*j + a3*k``, i.e. ``L_a = a1 I + a2 J + a3 K``."""

    a1: float
    a2: float
    a3: float

    def __post_init__(self):
        r = np.sqrt(self.a1**2 + self.a2**2 + self.a3**2)
        if not np.isclose(r, 1.0, rtol=0.0, atol=1e-12):
            raise ValueError(f"direction must have unit length, got |a| = {r!r}")

    @classmethod
    def normalized(cls, a1, a2, a3) -> "ImaginaryDirection":
        v = np.array([a1, a2, a3], dtype=float)
        v /= np.linalg.norm(v)
        return cls(*map(float, v))

    def quaternion(self) -> Quaternion:
        return Quaternion(0.0, self.a1, self.a2, self.a3)


def right_act(v, q):
    """Right action ``v -> v * q`` on a vector of ``H^n``.

    ``v`` is an ``(n, 4)`` array or a sequence of :class:`Quaternion`; the
    result has the same type.
    """
    qa = q.to_array() if isinstance(q, Quaternion) else np.asarray(q, dtype=float)
    if np.linalg.norm(qa) == 0.0:
        raise ValueError("right action needs a nonzero quaternion")
    if isinstance(v, (list, tuple)) and v and isinstance(v[0], Quaternion):
        return [c * Quaternion.from_array(qa) for c in v]
    return qmul(np.asarray(v, dtype=float), qa)


def haar_sample_su2(seed: int, count: int, method: str = "iid") -> np.ndarray:
    """Draw ``count`` unit quaternions uniformly on S^3 (Haar measure on SU(2)).

    Normalized 4D Gaussians; the stream is a pure function of ``seed``.
    ``method="sobol"`` feeds a scrambled Sobol sequence through the normal
    quantile instead of i.i.d. draws: every point is still Haar distributed
    but the set is far more even, so averages converge close to ``1/count``.
    Returns a ``(count, 4)`` array.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if method == "iid":
        g = np.random.default_rng(seed).standard_normal((count, 4))
    elif method == "sobol":
        with warnings.catch_warnings():
            # non power-of-two counts only lose the balance guarantee
            warnings.simplefilter("ignore", UserWarning)
            u = qmc.Sobol(4, scramble=True, seed=seed).random(count)
        g = special.ndtri(u)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return g / np.linalg.norm(g, axis=1, keepdims=True)
