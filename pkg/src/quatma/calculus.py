"""Flat quaternionic calculus on H^n.

Identifications used throughout:

* A quadratic form ``Q(h) = h^T S h`` on ``R^{4n}`` with real coordinates
  ``(t_a, x_a, y_a, z_a)`` per quaternionic variable ``q_a``.
* The SU(2)-invariant forms are exactly ``S = R(H)``, the real embedding of a
  hyper-Hermitian ``H``; this is the bijection behind :func:`hess_quaternionic`
  (``a * |h|^2`` corresponds to the scalar ``a``).  Equivalently
  ``H_ab = (1/4) sum_{c,d} S_{(a,c),(b,d)} e_c conj(e_d)``, i.e. the matrix of
  second Fueter derivatives with the operators
  ``d/d qbar = (1/2)(d_t + d_x i + d_y j + d_z k)`` acting from the right.
* I-holomorphic coordinates for ``I = right multiplication by i``:
  ``q_a = z_{2a-1} + j * z_{2a}``, so ``z_{2a-1} = t_a + sqrt(-1) x_a`` and
  ``z_{2a} = y_a - sqrt(-1) z_a``.  ``J`` (right multiplication by ``j``)
  acts on forms by pullback, ``(J alpha)(v) = alpha(J v)``.

With these choices the top coefficient of ``(dd_J u)^n`` equals
``n! * moore_det(Hess_H u)``; see :func:`calibrate_kappa`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._validation import check_grid, check_symmetric
from .exceptions import CalibrationInconsistent, JetNotPluriharmonic
from .grid import ScalarField, hessian_at, quaternionic_hessian_field
from .hyperhermitian import (
    HyperHermitianMatrix,
    moore_det,
    random_positive_definite,
    real_embedding,
)
from .pfaffian import pfaffian
from .quaternion import UNITS, right_matrix

__all__ = [
    "RealQuadraticForm",
    "TwoJet",
    "TwoFormI",
    "CalibrationConstant",
    "right_action_matrix",
    "su2_average",
    "su2_average_batch",
    "su2_complement",
    "haar_average_mc",
    "hess_quaternionic",
    "hess_field",
    "ddJ",
    "j_pullback",
    "wedge_top_coefficient",
    "calibrate_kappa",
    "is_psh",
    "psh_margin",
    "pluriharmonic_extend",
    "random_form",
]


@dataclass(frozen=True)
class RealQuadraticForm:
    """``Q(h) = h^T S h`` on ``R^{4n}``."""

    S: np.ndarray

    def __post_init__(self):
        S = check_symmetric(self.S)
        S = 0.5 * (S + S.T)
        S.setflags(write=False)
        object.__setattr__(self, "S", S)

    @property
    def n(self) -> int:
        return self.S.shape[0] // 4

    def __call__(self, h) -> float:
        h = np.asarray(h, dtype=float)
        return float(h @ self.S @ h)

    def __add__(self, other):
        return RealQuadraticForm(self.S + _as_matrix(other))

    def __sub__(self, other):
        return RealQuadraticForm(self.S - _as_matrix(other))


def _as_matrix(Q) -> np.ndarray:
    if isinstance(Q, RealQuadraticForm):
        return Q.S
    return check_symmetric(Q)


def random_form(n: int, rng) -> RealQuadraticForm:
    G = rng.standard_normal((4 * n, 4 * n))
    return RealQuadraticForm(0.5 * (G + G.T))


def right_action_matrix(q, n: int) -> np.ndarray:
    """Block-diagonal 4n x 4n matrix of ``v -> v * q`` on ``H^n``."""
    return np.kron(np.eye(n), right_matrix(q))


@lru_cache(maxsize=None)
def _unit_actions(n: int) -> np.ndarray:
    R = np.stack([right_action_matrix(e, n) for e in UNITS])
    R.setflags(write=False)
    return R


def su2_average(Q) -> RealQuadraticForm:
    """Average of ``Q(x * L)`` over unit quaternions ``L``.

    Uses the four-point formula over ``L in {1, i, j, k}``, which is exact:
    ``L -> Q(x * L)`` is a quadratic form in ``L`` and its sphere average is a
    quarter of its trace.
    """
    S = _as_matrix(Q)
    R = _unit_actions(S.shape[0] // 4)
    return RealQuadraticForm(0.25 * np.einsum("epa,pq,eqb->ab", R, S, R))


def su2_average_batch(S: np.ndarray) -> np.ndarray:
    """:func:`su2_average` over a stack of symmetric matrices ``(m, 4n, 4n)``."""
    S = np.asarray(S, dtype=float)
    R = _unit_actions(S.shape[-1] // 4)
    return 0.25 * np.einsum("epa,kpq,eqb->kab", R, S, R)


def su2_complement(Q) -> RealQuadraticForm:
    """``Q_+ = Q - <Q>_u``."""
    S = _as_matrix(Q)
    return RealQuadraticForm(S - su2_average(S).S)


def haar_average_mc(Q, samples: np.ndarray, batch: int = 65536) -> np.ndarray:
    """Monte Carlo estimate of the SU(2) average from Haar samples ``(m, 4)``.

    Every 4x4 block transforms as ``X -> R_L^T X R_L``, so the sample
    moments ``mean_k R_k[p, r] R_k[q, s]`` are accumulated once and then
    contracted with each block.
    """
    S = _as_matrix(Q)
    n = S.shape[0] // 4
    samples = np.asarray(samples, dtype=float)
    moment = np.zeros((4, 4, 4, 4))
    for start in range(0, len(samples), batch):
        R = right_matrix(samples[start : start + batch])  # (m, 4, 4)
        moment += np.einsum("kpr,kqs->prqs", R, R)
    moment /= len(samples)
    blocks = S.reshape(n, 4, n, 4)
    out = np.einsum("prqs,apbq->arbs", moment, blocks)
    return out.reshape(4 * n, 4 * n)


def hess_quaternionic(Q) -> HyperHermitianMatrix:
    """Hyper-Hermitian ``H`` with ``R(H) = su2_average(Q)``."""
    S = _as_matrix(Q)
    n = S.shape[0] // 4
    A = su2_average(S).S
    # block (a, b) of an invariant form is left multiplication by H_ab;
    # its first column is H_ab itself
    blocks = A.reshape(n, 4, n, 4)
    return HyperHermitianMatrix(blocks[:, :, :, 0].transpose(0, 2, 1))


def hess_field(u: ScalarField, point) -> HyperHermitianMatrix:
    """Hess_H of a lattice field at one point via centered differences."""
    check_grid(u.N)
    return hess_quaternionic(hessian_at(u, point))


@dataclass(frozen=True)
class TwoFormI:
    """``omega = sum_{l<k} M_lk dz_l ^ dz_k`` in flat I-holomorphic coordinates."""

    M: np.ndarray

    @property
    def n(self) -> int:
        return self.M.shape[0] // 2

    def is_real(self, atol: float = 1e-10) -> bool:
        """Realness ``J omega = conj(omega)``."""
        P = _j_on_dz(self.n)
        scale = max(1.0, float(np.max(np.abs(self.M))))
        return bool(np.allclose(P.T @ self.M @ P, self.M.conj(), rtol=0.0, atol=atol * scale))


@lru_cache(maxsize=None)
def _holomorphic_coords(n: int) -> np.ndarray:
    """Rows are ``z_l`` as complex linear functionals of the real coordinates."""
    C = np.zeros((2 * n, 4 * n), dtype=complex)
    for a in range(n):
        C[2 * a, 4 * a : 4 * a + 4] = [1.0, 1j, 0.0, 0.0]
        C[2 * a + 1, 4 * a : 4 * a + 4] = [0.0, 0.0, 1.0, -1j]
    C.setflags(write=False)
    return C


def _express(forms: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Split real-coordinate covectors into their dz and dzbar coefficients."""
    C = _holomorphic_coords(n)
    coeffs = forms @ np.linalg.inv(np.vstack([C, C.conj()]))
    return coeffs[:, : 2 * n], coeffs[:, 2 * n :]


@lru_cache(maxsize=None)
def _jinv_on_dzbar(n: int) -> np.ndarray:
    """``T`` with ``(J^{-1})^* dzbar_j = sum_k T_jk dz_k``."""
    C = _holomorphic_coords(n)
    Rj = right_action_matrix(UNITS[2], n)
    T, rest = _express(C.conj() @ np.linalg.inv(Rj), n)
    assert np.allclose(rest, 0.0, atol=1e-12)
    T.setflags(write=False)
    return T


@lru_cache(maxsize=None)
def _j_on_dz(n: int) -> np.ndarray:
    """``P`` with ``J^* dz_l = sum_m P_lm dzbar_m``."""
    C = _holomorphic_coords(n)
    Rj = right_action_matrix(UNITS[2], n)
    rest, P = _express(C @ Rj, n)
    assert np.allclose(rest, 0.0, atol=1e-12)
    P.setflags(write=False)
    return P


def ddJ(Q) -> TwoFormI:
    """``dd_J u`` at a point where ``D^2 u = S``; constant-coefficient J.

    ``dd_J u = sum u_{z_l zbar_j} T_jk dz_l ^ dz_k``; depends on second
    derivatives only, so a quadratic form determines it.
    """
    S = _as_matrix(Q)
    n = S.shape[0] // 4
    C = _holomorphic_coords(n)
    # Wirtinger: d/dz_l = (1/2) conj(C_l) . grad,  d/dzbar_j = (1/2) C_j . grad
    hc = 0.25 * C.conj() @ S @ C.T  # hc[l, j] = u_{z_l zbar_j}
    coef = hc @ _jinv_on_dzbar(n)
    return TwoFormI(coef - coef.T)


def j_pullback(omega: TwoFormI) -> TwoFormI:
    """Coefficients of ``J omega`` on ``dzbar_l ^ dzbar_k``."""
    P = _j_on_dz(omega.n)
    return TwoFormI(P.T @ omega.M @ P)


def wedge_top_coefficient(omega) -> complex | float:
    """Coefficient of ``dz_1 ^ ... ^ dz_2n`` in ``omega^n / n!`` (the Pfaffian)."""
    M = omega.M if isinstance(omega, TwoFormI) else np.asarray(omega)
    val = pfaffian(M)
    if np.iscomplexobj(val) and abs(val.imag) <= 1e-12 * max(1.0, abs(val)):
        return float(val.real)
    return val


@dataclass(frozen=True)
class CalibrationConstant:
    """Measured ratio ``top coeff of (dd_J u)^n / moore_det(Hess_H u)``."""

    n: int
    kappa: float
    reference_value: float
    ratios: tuple = field(default=(), repr=False)

    @property
    def discrepancy_factor(self) -> float:
        """``kappa / (n!/4^n)``; equals ``4^n`` under the half-normalized Fueter operators."""
        return self.kappa / self.reference_value

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "kappa": self.kappa,
            "n_factorial_over_4n": self.reference_value,
            "discrepancy_factor": self.discrepancy_factor,
            "samples": len(self.ratios),
        }


def _density_ratio(S: np.ndarray) -> float:
    n = S.shape[0] // 4
    top = math.factorial(n) * wedge_top_coefficient(ddJ(S))
    ratio = top / moore_det(hess_quaternionic(S))
    if np.iscomplexobj(ratio):
        if abs(ratio.imag) > 1e-9 * abs(ratio):
            raise CalibrationInconsistent(f"complex density ratio {ratio!r}")
        ratio = ratio.real
    return float(ratio)


def calibrate_kappa(n: int, samples: int = 20, seed: int = 0, rtol: float = 1e-9) -> CalibrationConstant:
    """Measure the wedge-power/Moore calibration constant and check its constancy.

    The reference function is ``sum |q_a|^2``; ``samples`` further strictly
    plurisubharmonic quadratics have a random positive definite invariant
    part plus a random non-invariant part.
    """
    if n not in (1, 2, 3):
        raise ValueError("calibration is supported for n in {1, 2, 3}")
    rng = np.random.default_rng(seed)
    ref = _density_ratio(2.0 * np.eye(4 * n))
    ratios = [ref]
    for k in range(samples):
        P = random_positive_definite(n, seed=int(rng.integers(2**31)), shift=0.5)
        S = real_embedding(P) + su2_complement(random_form(n, rng)).S
        ratios.append(_density_ratio(S))
    ratios = np.array(ratios)
    spread = np.max(np.abs(ratios - ref)) / abs(ref)
    if spread > rtol:
        raise CalibrationInconsistent(
            f"density ratio varies by {spread:.3e} (> {rtol:.0e}) across test functions"
        )
    return CalibrationConstant(
        n=n, kappa=ref, reference_value=math.factorial(n) / 4**n, ratios=tuple(ratios)
    )


def _hermitian_min_eig(H: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of a field of hyper-Hermitian matrices ``(n, n, 4) + grid``."""
    n = H.shape[0]
    if n == 1:
        return H[0, 0, 0]
    if n == 2:
        a, c = H[0, 0, 0], H[1, 1, 0]
        q2 = np.sum(H[0, 1] ** 2, axis=0)
        return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + q2)
    grid = H.shape[3:]
    flat = np.moveaxis(H.reshape(n, n, 4, -1), -1, 0)
    z = flat[..., 0] + 1j * flat[..., 1]
    w = flat[..., 2] + 1j * flat[..., 3]
    chi = np.concatenate(
        [np.concatenate([z, w], axis=2), np.concatenate([-w.conj(), z.conj()], axis=2)], axis=1
    )
    return np.linalg.eigvalsh(chi)[:, 0].reshape(grid)


def psh_margin(u: ScalarField, background=None) -> tuple[float, tuple]:
    """Minimum over the lattice of the smallest eigenvalue of ``background + Hess_H u``.

    Returns ``(margin, worst_index)``.
    """
    check_grid(u.N)
    H = quaternionic_hessian_field(u.values, u.n, u.h)
    if background is not None:
        B = background.entries if isinstance(background, HyperHermitianMatrix) else np.asarray(background)
        H = H + B.reshape(B.shape + (1,) * (4 * u.n))
    m = _hermitian_min_eig(H)
    idx = np.unravel_index(int(np.argmin(m)), m.shape)
    return float(m[idx]), tuple(int(i) for i in idx)


def is_psh(u: ScalarField, background=None, margin: float = 0.0, atol: float = 1e-12) -> bool:
    """True iff ``background + Hess_H u`` is PSD (or has eigenvalues >= ``margin``) everywhere."""
    m, _ = psh_margin(u, background)
    if margin > 0.0:
        return m >= margin
    return m >= -atol


@dataclass(frozen=True)
class TwoJet:
    """``f(z0 + h) = value + gradient . h + (1/2) h^T S h``."""

    base: np.ndarray
    value: float
    gradient: np.ndarray
    quadratic: RealQuadraticForm

    @property
    def n(self) -> int:
        return self.quadratic.n

    def __call__(self, z) -> float:
        h = np.asarray(z, dtype=float) - np.asarray(self.base, dtype=float)
        return float(self.value + self.gradient @ h + 0.5 * h @ self.quadratic.S @ h)


def pluriharmonic_extend(jet: TwoJet, atol: float = 1e-10):
    """Extend a jet with ``dd_J jet(z0) = 0`` to a global pluriharmonic function.

    On flat space the jet's own quadratic polynomial does the job: its real
    Hessian is constant, so ``dd_J`` vanishes identically.  Returns a callable
    on ``R^{4n}`` carrying the jet data.
    """
    avg = su2_average(jet.quadratic).S
    scale = max(1.0, float(np.max(np.abs(jet.quadratic.S))))
    if np.max(np.abs(avg)) > atol * scale:
        raise JetNotPluriharmonic(
            f"quaternionic Hessian of the jet is nonzero (max {np.max(np.abs(avg)):.3e})"
        )
    return TwoJet(
        base=np.array(jet.base, dtype=float),
        value=float(jet.value),
        gradient=np.array(jet.gradient, dtype=float),
        quadratic=jet.quadratic,
    )
