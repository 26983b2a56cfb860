"""Scalar fields on the periodic lattice over the torus (R/Z)^{4n}, and stencils.

Axis order is ``t1, x1, y1, z1, t2, x2, ...``; values are stored row-major.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ._validation import check_grid
from .quaternion import UNITS, qconj, qmul

__all__ = [
    "ScalarField",
    "centered_diff",
    "second_diff",
    "mixed_diff",
    "hessian_at",
    "quaternionic_hessian_field",
    "FUETER_WEIGHTS",
]

#: ``FUETER_WEIGHTS[m, c, d]`` is component ``m`` of ``e_c * conj(e_d)``.
FUETER_WEIGHTS = np.moveaxis(qmul(UNITS[:, None, :], qconj(UNITS)[None, :, :]), -1, 0)


def _axis_names(n: int) -> list[str]:
    return [f"{c}{a + 1}" for a in range(n) for c in "txyz"]


class ScalarField:
    """Real values on the uniform periodic lattice with ``N`` points per axis.

    Parameters
    ----------
    n : int
        Quaternionic dimension; the lattice has ``4n`` axes.
    N : int
        Points per axis; spacing is ``h = 1 / N``.
    values : array_like, optional
        Array of shape ``(N,) * 4n``.  Defaults to zeros.
    """

    def __init__(self, n: int, N: int, values=None):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = int(n)
        self.N = check_grid(N, minimum=1)
        shape = (self.N,) * (4 * self.n)
        if values is None:
            values = np.zeros(shape)
        values = np.asarray(values, dtype=float)
        if values.shape != shape:
            raise ValueError(f"values must have shape {shape}, got {values.shape}")
        self.values = values

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def __getitem__(self, index):
        idx = tuple(int(i) % self.N for i in index)
        return float(self.values[idx])

    def __repr__(self):
        return f"ScalarField(n={self.n}, N={self.N})"

    def copy(self) -> "ScalarField":
        return ScalarField(self.n, self.N, self.values.copy())

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.n, self.N, values)

    def coordinates(self) -> list[np.ndarray]:
        """Open-mesh coordinate arrays, one per axis, broadcastable to the grid."""
        x = np.arange(self.N) / self.N
        d = 4 * self.n
        return [x.reshape([-1 if a == b else 1 for b in range(d)]) for a in range(d)]

    @classmethod
    def from_function(cls, n: int, N: int, fn) -> "ScalarField":
        """Sample ``fn(coords)`` where ``coords`` is the list of axis arrays."""
        f = cls(n, N)
        vals = np.broadcast_to(np.asarray(fn(f.coordinates()), dtype=float), f.shape)
        return cls(n, N, np.array(vals))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l1_norm(self) -> float:
        return float(np.mean(np.abs(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    # -- serialization: flat little-endian float64 + JSON header -----------
    def header(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "dtype": "<f8",
            "ordering": "row-major",
            "axes": _axis_names(self.n),
        }

    def to_bytes(self) -> bytes:
        return np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, header: dict, payload: bytes) -> "ScalarField":
        n, N = int(header["n"]), int(header["N"])
        if header.get("ordering", "row-major") != "row-major":
            raise ValueError("only row-major ordering is supported")
        vals = np.frombuffer(payload, dtype="<f8").astype(float)
        return cls(n, N, vals.reshape((N,) * (4 * n)))

    def save(self, stem) -> tuple[Path, Path]:
        stem = Path(stem)
        bin_path = stem.with_suffix(".bin")
        hdr_path = stem.with_suffix(".json")
        bin_path.write_bytes(self.to_bytes())
        hdr_path.write_text(json.dumps(self.header(), indent=2, sort_keys=True) + "\n")
        return bin_path, hdr_path

    @classmethod
    def load(cls, stem) -> "ScalarField":
        stem = Path(stem)
        header = json.loads(stem.with_suffix(".json").read_text())
        return cls.from_bytes(header, stem.with_suffix(".bin").read_bytes())


def centered_diff(v: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(v, -1, axis) - np.roll(v, 1, axis)) / (2.0 * h)


def second_diff(v: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(v, -1, axis) - 2.0 * v + np.roll(v, 1, axis)) / (h * h)


def mixed_diff(v: np.ndarray, a1: int, a2: int, h: float) -> np.ndarray:
    """Cross stencil ``(u++ - u+- - u-+ + u--) / (4h^2)``."""
    return centered_diff(centered_diff(v, a1, h), a2, h)


def hessian_at(field: ScalarField, point) -> np.ndarray:
    """Finite-difference real Hessian ``D^2 u`` (4n x 4n) at one lattice point."""
    d = 4 * field.n
    h = field.h
    p = np.array(point, dtype=int)

    def u(offset):
        return field[p + offset]

    E = np.eye(d, dtype=int)
    S = np.empty((d, d))
    u0 = u(np.zeros(d, dtype=int))
    for a in range(d):
        S[a, a] = (u(E[a]) - 2.0 * u0 + u(-E[a])) / h**2
        for b in range(a + 1, d):
            S[a, b] = S[b, a] = (
                u(E[a] + E[b]) - u(E[a] - E[b]) - u(-E[a] + E[b]) + u(-E[a] - E[b])
            ) / (4.0 * h**2)
    return S


def quaternionic_hessian_field(values: np.ndarray, n: int, h: float) -> np.ndarray:
    """Hess_H of a periodic lattice field, shape ``(n, n, 4) + grid``.

    Diagonal entries are a quarter of the Laplacian in one quaternionic
    variable; off-diagonal entries contract the cross-block mixed derivatives
    with :data:`FUETER_WEIGHTS`.
    """
    grid = values.shape
    H = np.zeros((n, n, 4) + grid)
    for a in range(n):
        lap = sum(second_diff(values, 4 * a + c, h) for c in range(4))
        H[a, a, 0] = 0.25 * lap
    for b in range(n):
        for a in range(b):
            # mixed derivatives u_{(a,c),(b,d)}: differentiate along block b first
            for d in range(4):
                g = centered_diff(values, 4 * b + d, h)
                for c in range(4):
                    D = centered_diff(g, 4 * a + c, h)
                    w = FUETER_WEIGHTS[:, c, d]
                    for m in np.flatnonzero(w):
                        H[a, b, m] += 0.25 * w[m] * D
            H[b, a] = H[a, b] * np.array([1.0, -1.0, -1.0, -1.0]).reshape((4,) + (1,) * len(grid))
    return H
