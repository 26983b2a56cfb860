"""Analytic data on the torus: plane-wave series and the datum families ``F``.

A :class:`PlaneWaves` series ``sum_j c_j cos(2 pi k_j . x + p_j)`` carries its
exact Hessian, which is what manufactured solutions need: the datum is built
from the continuous quaternionic Hessian, so the discrete solution differs
from the target only by stencil error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .grid import FUETER_WEIGHTS, ScalarField
from .hyperhermitian import moore_det_field

__all__ = [
    "PlaneWaves",
    "quaternionic_from_real",
    "manufactured_target",
    "manufactured_datum",
    "make_datum",
    "FAMILIES",
]

FAMILIES = ("zero", "cosine", "bump", "manufactured")


@dataclass(frozen=True)
class PlaneWaves:
    """Finite cosine series on ``(R/Z)^d`` with integer wave vectors."""

    coefficients: tuple
    modes: tuple
    phases: tuple

    def __post_init__(self):
        if not (len(self.coefficients) == len(self.modes) == len(self.phases)):
            raise ValueError("coefficients, modes and phases must have equal length")

    @property
    def d(self) -> int:
        return len(self.modes[0])

    @classmethod
    def single(cls, coefficient, mode, phase=0.0) -> "PlaneWaves":
        return cls((float(coefficient),), (tuple(int(k) for k in mode),), (float(phase),))

    def __add__(self, other: "PlaneWaves") -> "PlaneWaves":
        return PlaneWaves(
            self.coefficients + other.coefficients,
            self.modes + other.modes,
            self.phases + other.phases,
        )

    def __mul__(self, other):
        if np.isscalar(other):
            return PlaneWaves(
                tuple(float(other) * c for c in self.coefficients), self.modes, self.phases
            )
        # cos(a) cos(b) = (cos(a + b) + cos(a - b)) / 2
        coefs, modes, phases = [], [], []
        for c1, k1, p1 in zip(self.coefficients, self.modes, self.phases):
            for c2, k2, p2 in zip(other.coefficients, other.modes, other.phases):
                for sign in (1, -1):
                    coefs.append(0.5 * c1 * c2)
                    modes.append(tuple(a + sign * b for a, b in zip(k1, k2)))
                    phases.append(p1 + sign * p2)
        return PlaneWaves(tuple(coefs), tuple(modes), tuple(phases))

    __rmul__ = __mul__

    def _angles(self, coords):
        for c, k, p in zip(self.coefficients, self.modes, self.phases):
            arg = p + 2.0 * np.pi * sum(ka * x for ka, x in zip(k, coords) if ka)
            yield c, np.asarray(k, dtype=float), arg

    def value(self, coords) -> np.ndarray:
        shape = np.broadcast_shapes(*(np.shape(x) for x in coords))
        out = np.zeros(shape)
        for c, _, arg in self._angles(coords):
            out = out + c * np.cos(arg)
        return out

    def hessian(self, coords) -> np.ndarray:
        """Exact real Hessian, shape ``(d, d) + grid``."""
        shape = np.broadcast_shapes(*(np.shape(x) for x in coords))
        out = np.zeros((self.d, self.d) + shape)
        for c, k, arg in self._angles(coords):
            kk = np.outer(k, k).reshape((self.d, self.d) + (1,) * len(shape))
            out -= (2.0 * np.pi) ** 2 * c * kk * np.cos(arg)
        return out

    def field(self, n: int, N: int) -> ScalarField:
        return ScalarField.from_function(n, N, self.value)


def quaternionic_from_real(S: np.ndarray, n: int) -> np.ndarray:
    """Hess_H entries ``(n, n, 4) + grid`` from a field of real Hessians ``(4n, 4n) + grid``."""
    grid = S.shape[2:]
    blocks = S.reshape((n, 4, n, 4) + grid)
    return 0.25 * np.einsum("mcd,acbd...->abm...", FUETER_WEIGHTS, blocks)


def _axis(n: int, name: str) -> int:
    names = [f"{c}{a + 1}" for a in range(n) for c in "txyz"]
    if name not in names:
        raise ConfigError(f"unknown axis {name!r}; expected one of {names}")
    return names.index(name)


def _wave(n: int, axis: str) -> PlaneWaves:
    k = [0] * (4 * n)
    k[_axis(n, axis)] = 1
    return PlaneWaves.single(1.0, k)


def manufactured_target(n: int, amplitude: float | None = None) -> PlaneWaves:
    """Default manufactured potential ``amplitude * (cos 2pi t1 + cos 2pi u cos 2pi x1)``.

    ``u`` is ``t2`` for ``n = 2`` and ``y1`` for ``n = 1``.  The default
    amplitude is 0.05 for ``n = 2`` and 0.02 for ``n = 1``; at n = 1 all the
    curvature sits in one quaternionic variable and 0.05 is not psh.
    """
    if amplitude is None:
        amplitude = 0.05 if n >= 2 else 0.02
    second = "t2" if n >= 2 else "y1"
    return amplitude * (_wave(n, "t1") + _wave(n, second) * _wave(n, "x1"))


def manufactured_datum(phi: PlaneWaves, n: int, N: int) -> ScalarField:
    """``F = log moore_det(Id + Hess_H phi)`` with the exact Hessian of ``phi``."""
    f = ScalarField(n, N)
    H = quaternionic_from_real(phi.hessian(f.coordinates()), n)
    H = np.broadcast_to(H, (n, n, 4) + f.shape).copy()
    H[np.arange(n), np.arange(n), 0] += 1.0
    det = moore_det_field(H)
    if np.min(det) <= 0.0:
        raise ConfigError("manufactured potential is not strictly plurisubharmonic")
    return ScalarField(n, N, np.log(det))


def _periodic_sq_distance(coords, center) -> np.ndarray:
    total = 0.0
    for x, c in zip(coords, center):
        dx = np.abs(x - c)
        dx = np.minimum(dx, 1.0 - dx)
        total = total + dx * dx
    return total


def make_datum(n: int, N: int, description: dict):
    """Build ``F`` from a family description.

    Returns ``(F, target)`` where ``target`` is the manufactured potential
    (a :class:`PlaneWaves`) or ``None``.
    """
    desc = dict(description)
    family = desc.pop("family", None)
    scale = float(desc.pop("scale", 1.0))
    params = dict(desc.pop("params", {}))
    if desc:
        raise ConfigError(f"unknown keys in F: {sorted(desc)}")
    d = 4 * n
    if family == "zero":
        _no_params(family, params, set())
        return ScalarField(n, N), None
    if family == "cosine":
        _no_params(family, params, {"amplitude", "mode"})
        amp = float(params.get("amplitude", 1.0))
        mode = params.get("mode", [1] + [0] * (d - 1))
        if len(mode) != d:
            raise ConfigError(f"cosine mode must have {d} entries")
        waves = PlaneWaves.single(amp * scale, mode)
        return waves.field(n, N), None
    if family == "bump":
        _no_params(family, params, {"amplitude", "center", "width"})
        amp = float(params.get("amplitude", 1.0))
        width = float(params.get("width", 0.15))
        center = params.get("center", [0.5] * d)
        if len(center) != d or width <= 0:
            raise ConfigError("bump needs a center of length 4n and a positive width")
        F = ScalarField.from_function(
            n, N, lambda X: amp * scale * np.exp(-_periodic_sq_distance(X, center) / (2 * width**2))
        )
        return F, None
    if family == "manufactured":
        _no_params(family, params, {"amplitude"})
        amp = params.get("amplitude")
        phi = manufactured_target(n, None if amp is None else float(amp))
        phi = phi * scale
        return manufactured_datum(phi, n, N), phi
    raise ConfigError(f"unknown F family {family!r}; expected one of {list(FAMILIES)}")


def _no_params(family, params, allowed):
    extra = set(params) - set(allowed)
    if extra:
        raise ConfigError(f"unknown params for {family!r}: {sorted(extra)}")
