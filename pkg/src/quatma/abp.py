"""Alexandrov-Bakelman-Pucci chain on lattice domains of R^{4n}.

A domain is a boolean ``mask`` inside a box lattice; its closure adds the
one-step neighbourhood ring, where the field carries its boundary values.
Stencils (gradient, real Hessian, quaternionic Hessian) are evaluated on the
*core*: mask points whose cross-stencil neighbours all lie in the mask, so no
stencil ever reads a boundary-ring value as if it were interior data.

Constants
---------
``abp_constant(d) = omega_d ** (-1/d)`` is the classical dimensional
constant of the ABP inequality (``omega_d`` the volume of the unit ball).
The pointwise constant ``det D^2u <= c * moore_det(Hess_H u)**4`` is 1 for
every n: ``log det`` is concave and ``Hess_H`` is the SU(2) average of
``D^2 u``.  The key-proposition and key-lemma constants follow by
composition.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .calculus import (
    _hermitian_min_eig,
    hess_quaternionic,
    random_form,
    su2_average_batch,
    su2_complement,
)
from .exceptions import GridTooCoarse, PreconditionViolated, SublevelTouchesBoundary
from .grid import centered_diff, quaternionic_hessian_field, second_diff
from .hyperhermitian import moore_det, moore_det_field, random_positive_definite, real_embedding

__all__ = [
    "BoxField",
    "ContactSet",
    "AbpReport",
    "abp_constant",
    "POINTWISE_CONSTANT",
    "proposition_constant",
    "lemma_constant",
    "contact_set",
    "random_psd_forms",
    "pointwise_det_ratios",
    "pointwise_det_inequality",
    "key_proposition_sides",
    "verify_key_proposition",
    "verify_key_lemma",
    "quadratic_well",
    "perturbed_well",
    "WellInstance",
]

#: Sample maxima of ``det S / moore_det(Hess_H S)**4`` from the seeded
#: derivation runs (seed 0, 10**4 samples); equality is attained on
#: SU(2)-invariant samples, which the sampler includes.
POINTWISE_CONSTANT = {1: 1.0, 2: 1.0}


def abp_constant(d: int) -> float:
    omega = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return omega ** (-1.0 / d)


def proposition_constant(n: int) -> float:
    d = 4 * n
    return abp_constant(d) * POINTWISE_CONSTANT.get(n, 1.0) ** (1.0 / d)


def lemma_constant(n: int) -> float:
    return proposition_constant(n) ** (4 * n)


class BoxField:
    """Real values on a box lattice with spacing ``h`` and a domain mask.

    Parameters
    ----------
    n : int
        Quaternionic dimension (``d = 4n`` axes).
    values : ndarray of shape (m,) * d
    h : float
        Lattice spacing.
    mask : ndarray of bool, optional
        Domain ``D``.  Defaults to every point off the outer shell.  The mask
        may not touch the outer shell.
    origin : float
        Coordinate of index 0 along every axis.
    """

    def __init__(self, n: int, values, h: float, mask=None, origin: float = 0.0):
        values = np.asarray(values, dtype=float)
        d = 4 * n
        if values.ndim != d or len(set(values.shape)) != 1:
            raise ValueError(f"expected a cubic array with {d} axes, got shape {values.shape}")
        if values.shape[0] < 5:
            raise GridTooCoarse("box lattice needs at least 5 points per axis")
        self.n = int(n)
        self.values = values
        self.h = float(h)
        self.origin = float(origin)
        shell = np.ones(values.shape, dtype=bool)
        shell[(slice(1, -1),) * d] = False
        if mask is None:
            mask = ~shell
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != values.shape:
            raise ValueError("mask shape does not match values")
        if np.any(mask & shell):
            raise ValueError("domain mask must not touch the outer shell of the box")
        self.mask = mask

    @property
    def d(self) -> int:
        return 4 * self.n

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_function(cls, n: int, m: int, fn, lo: float = 0.0, hi: float = 1.0, mask=None):
        """Sample ``fn(coords)`` on ``[lo, hi]^{4n}`` with ``m`` points per axis."""
        h = (hi - lo) / (m - 1)
        x = lo + h * np.arange(m)
        d = 4 * n
        coords = [x.reshape([-1 if a == b else 1 for b in range(d)]) for a in range(d)]
        vals = np.broadcast_to(np.asarray(fn(coords), dtype=float), (m,) * d)
        return cls(n, np.array(vals), h, mask=mask, origin=lo)

    @classmethod
    def sublevel(cls, n: int, values, h: float, origin: float = 0.0, level: float = 0.0):
        """Domain ``{u < level}``; values clipped to ``level`` outside it."""
        values = np.asarray(values, dtype=float)
        shell = np.ones(values.shape, dtype=bool)
        shell[(slice(1, -1),) * values.ndim] = False
        mask = (values < level) & ~shell
        return cls(n, np.minimum(values, level), h, mask=mask, origin=origin)

    def scaled(self, lam: float) -> "BoxField":
        return BoxField(self.n, lam * self.values, self.h, mask=self.mask, origin=self.origin)

    def shifted(self, c: float) -> "BoxField":
        return BoxField(self.n, self.values + c, self.h, mask=self.mask, origin=self.origin)

    def padded(self, layers: int) -> "BoxField":
        """Enlarge the box by ``layers`` points per side with value 0; the domain grows with it."""
        vals = np.pad(self.values, layers, constant_values=0.0)
        return BoxField(self.n, vals, self.h, mask=None, origin=self.origin - layers * self.h)

    def _footprint(self):
        # cross stencil: offsets with at most two nonzero +-1 entries
        return ndimage.generate_binary_structure(self.d, 2)

    def closure(self) -> np.ndarray:
        return ndimage.binary_dilation(self.mask, structure=self._footprint())

    def core(self) -> np.ndarray:
        return ndimage.binary_erosion(self.mask, structure=self._footprint(), border_value=0)

    def points(self, where: np.ndarray) -> np.ndarray:
        return self.origin + self.h * np.argwhere(where).astype(float)

    def diameter(self) -> float:
        """Euclidean diameter of the closed domain (mask plus boundary ring)."""
        pts = self.points(self.closure())
        if len(pts) < 2:
            return 0.0
        try:
            pts = pts[ConvexHull(pts).vertices]
        except (QhullError, ValueError):
            pass
        return float(pdist(pts).max())

    def volume_element(self) -> float:
        return self.h**self.d

    def real_hessians(self, where: np.ndarray) -> np.ndarray:
        """``D^2 u`` at the selected points, shape ``(k, d, d)``."""
        d, h, v = self.d, self.h, self.values
        out = np.empty((int(where.sum()), d, d))
        for a in range(d):
            out[:, a, a] = second_diff(v, a, h)[where]
            g = centered_diff(v, a, h)
            for b in range(a + 1, d):
                out[:, a, b] = out[:, b, a] = centered_diff(g, b, h)[where]
        return out

    def gradients(self, where: np.ndarray) -> np.ndarray:
        return np.stack([centered_diff(self.values, a, self.h)[where] for a in range(self.d)], axis=1)

    def quaternionic_hessians(self) -> np.ndarray:
        """Hess_H at every lattice point, shape ``(n, n, 4) + grid``; valid on the core."""
        return quaternionic_hessian_field(self.values, self.n, self.h)

    def moore_density(self, where: np.ndarray) -> np.ndarray:
        """``f = moore_det(Hess_H u)`` at the selected points."""
        H = self.quaternionic_hessians()
        if self.n == 1:
            return H[0, 0, 0][where]
        if self.n == 2:
            a, c = H[0, 0, 0][where], H[1, 1, 0][where]
            return a * c - np.sum(H[0, 1][:, where] ** 2, axis=0)
        sel = np.moveaxis(H[..., where], -1, 0)
        return np.array([moore_det(M) for M in sel])

    def psh_min_eigenvalue(self, where: np.ndarray) -> float:
        H = self.quaternionic_hessians()
        m = _hermitian_min_eig(H)
        return float(np.min(m[where])) if where.any() else math.inf


@dataclass
class ContactSet:
    """Lower contact set of a lattice field on its domain."""

    mask: np.ndarray = field(repr=False)
    diameter: float
    det_hessian: np.ndarray = field(repr=False)
    min_eigenvalue: np.ndarray = field(repr=False)
    tolerance: float

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def integral(self, h: float, d: int) -> float:
        """``sum_Gamma det D^2 u * h^d``; negative round-off determinants count as 0."""
        return float(np.sum(np.clip(self.det_hessian, 0.0, None)) * h**d)


def contact_set(u: BoxField, slack: float = 1e-10, chunk: int = 2048) -> ContactSet:
    """Brute-force lower contact set.

    ``x`` (a core point) belongs to Gamma iff ``u(x) + <Du(x), y - x> <= u(y)``
    for every ``y`` in the closed domain, up to ``slack * ||u||_inf``.
    """
    core = u.core()
    if not core.any():
        raise GridTooCoarse("domain has no interior points with a full stencil")
    closure = u.closure()
    X = u.points(core)
    Y = u.points(closure)
    uy = u.values[closure]
    ux = u.values[core]
    G = u.gradients(core)
    tol = slack * max(float(np.max(np.abs(u.values[closure]))), 1e-300)
    inside = np.empty(len(X), dtype=bool)
    for s in range(0, len(X), chunk):
        g, x = G[s : s + chunk], X[s : s + chunk]
        # min over y of u(y) - <g, y>, compared with u(x) - <g, x>
        lower = np.min(uy[None, :] - g @ Y.T, axis=1)
        inside[s : s + chunk] = lower >= ux[s : s + chunk] - np.einsum("ij,ij->i", g, x) - tol
    gamma = np.zeros_like(core)
    gamma[core] = inside
    hess = u.real_hessians(gamma)
    if len(hess):
        dets = np.linalg.det(hess)
        mins = np.linalg.eigvalsh(hess)[:, 0]
    else:
        dets = mins = np.zeros(0)
    return ContactSet(gamma, u.diameter(), dets, mins, tol)


def random_psd_forms(n: int, samples: int, seed: int) -> np.ndarray:
    """PSD real Hessians ``(samples, 4n, 4n)`` for the pointwise inequality.

    A quarter are generic Wishart matrices, a quarter rank-deficient, and the
    rest are ``R(P) + t * Q_+`` with ``P`` positive definite hyper-Hermitian,
    ``Q_+`` a non-invariant form and ``t`` shrunk until the sum is PSD
    (``t = 0`` recurs, giving the invariant equality cases).
    """
    rng = np.random.default_rng(seed)
    d = 4 * n
    out = np.empty((samples, d, d))
    for k in range(samples):
        kind = k % 4
        if kind == 0:
            B = rng.standard_normal((d, d))
            S = B @ B.T
        elif kind == 1:
            B = rng.standard_normal((d, d - 1))
            S = B @ B.T
        else:
            P = real_embedding(random_positive_definite(n, int(rng.integers(2**31)), shift=0.1))
            Qp = su2_complement(random_form(n, rng)).S
            t = float(rng.choice([0.0, rng.uniform(0.0, 1.0)]))
            while t > 0 and np.linalg.eigvalsh(P + t * Qp)[0] < 0:
                t *= 0.5
                if t < 1e-6:
                    t = 0.0
            S = P + t * Qp
        out[k] = 0.5 * (S + S.T)
    return out


def pointwise_det_ratios(forms: np.ndarray) -> np.ndarray:
    """``det S / moore_det(Hess_H S)**4`` for a stack of PSD forms; 0 where ``det S <= 0``."""
    forms = np.asarray(forms, dtype=float)
    n = forms.shape[1] // 4
    if n <= 2:
        avg = su2_average_batch(forms)
        H = avg.reshape(-1, n, 4, n, 4)[:, :, :, :, 0].transpose(1, 3, 2, 0)
        f = moore_det_field(H)
    else:
        f = np.array([moore_det(hess_quaternionic(S)) for S in forms])
    det = np.linalg.det(forms)
    ratios = np.zeros(len(forms))
    ok = det > 0.0
    ratios[ok] = det[ok] / f[ok] ** 4
    return ratios


def pointwise_det_inequality(n: int, samples: int = 10_000, seed: int = 0, check: bool = True) -> float:
    """Sample maximum of ``det S / moore_det(Hess_H S)**4`` over random PSD ``S``.

    With ``check`` the maximum is compared against :data:`POINTWISE_CONSTANT`
    (absolute slack 1e-9).
    """
    if n not in (1, 2):
        raise ValueError("pointwise inequality harness supports n in {1, 2}")
    c = float(np.max(pointwise_det_ratios(random_psd_forms(n, samples, seed))))
    if check and c > POINTWISE_CONSTANT[n] + 1e-9:
        raise AssertionError(f"pointwise ratio {c!r} exceeds pinned constant {POINTWISE_CONSTANT[n]!r}")
    return c


@dataclass
class AbpReport:
    """Both sides of the ABP chain for one lattice instance."""

    n: int
    sup_u: float
    diam: float
    contact_points: int
    contact_integral: float
    f_L4: float
    f_inf: float
    u_L1: float
    abp_rhs: float
    proposition_rhs: float
    abp_ratio: float | None
    proposition_ratio: float | None
    pointwise_max_ratio: float | None
    abp_holds: bool
    pointwise_holds: bool
    proposition_holds: bool
    a: float | None = None
    lemma_rhs: float | None = None
    lemma_ratio: float | None = None
    lemma_holds: bool | None = None
    sublevel_volume: float | None = None
    sublevel_volume_bound: float | None = None
    constants: dict = field(default_factory=dict)
    reduction: dict | None = None

    def as_dict(self) -> dict:
        return asdict(self)

    CSV_COLUMNS = (
        "n", "sup_u", "diam", "contact_points", "contact_integral", "f_L4", "f_inf", "u_L1",
        "abp_ratio", "proposition_ratio", "lemma_ratio", "abp_holds", "proposition_holds", "lemma_holds",
    )

    def csv_row(self) -> list:
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def _ratio(num: float, den: float) -> float | None:
    return num / den if den > 1e-14 else None


def key_proposition_sides(u: BoxField, tolerance: float = 1e-9) -> AbpReport:
    """Evaluate every quantity of the proposition without checking preconditions."""
    n, d = u.n, u.d
    dv = u.volume_element()
    core = u.core()
    sup_u = float(np.max(np.abs(u.values[u.closure()])))
    diam = u.diameter()
    gamma = contact_set(u)
    integral = gamma.integral(u.h, d)
    f = u.moore_density(core)
    f_l4 = float(np.sum(f**4) * dv) ** 0.25
    f_inf = float(np.max(np.abs(f))) if f.size else 0.0
    u_l1 = float(np.sum(np.abs(u.values[u.mask])) * dv)
    c_abp = abp_constant(d)
    c_pt = POINTWISE_CONSTANT.get(n, 1.0)
    c_prop = proposition_constant(n)
    abp_rhs = c_abp * diam * integral ** (1.0 / d)
    prop_rhs = c_prop * diam * f_l4 ** (1.0 / n)
    # pointwise inequality at contact points
    f_gamma = u.moore_density(gamma.mask)
    with np.errstate(divide="ignore", invalid="ignore"):
        pw = np.where(f_gamma**4 > 0, np.clip(gamma.det_hessian, 0, None) / f_gamma**4, 0.0)
    pw_max = float(pw.max()) if pw.size else None
    slack = tolerance * max(sup_u, 1e-300)
    return AbpReport(
        n=n,
        sup_u=sup_u,
        diam=diam,
        contact_points=gamma.size,
        contact_integral=integral,
        f_L4=f_l4,
        f_inf=f_inf,
        u_L1=u_l1,
        abp_rhs=abp_rhs,
        proposition_rhs=prop_rhs,
        abp_ratio=_ratio(sup_u, diam * integral ** (1.0 / d)),
        proposition_ratio=_ratio(sup_u, diam * f_l4 ** (1.0 / n)),
        pointwise_max_ratio=pw_max,
        abp_holds=bool(sup_u <= abp_rhs + slack),
        pointwise_holds=bool(pw_max is None or pw_max <= c_pt * (1 + 1e-6)),
        proposition_holds=bool(sup_u <= prop_rhs + slack),
        constants={"abp": c_abp, "pointwise": c_pt, "proposition": c_prop, "lemma": lemma_constant(n)},
    )


def _check_psh(u: BoxField, where: np.ndarray, what: str):
    m = u.psh_min_eigenvalue(where)
    if not m > 0.0:
        raise PreconditionViolated(f"{what}: not strictly plurisubharmonic (min eigenvalue {m:.3e})")


def verify_key_proposition(u: BoxField, tolerance: float = 1e-9) -> AbpReport:
    """Check ``||u||_inf <= C diam(D) ||f||_4^{1/n}`` and its ABP intermediate.

    Preconditions: ``u <= 0`` on the domain, ``u = 0`` on the boundary ring,
    strictly plurisubharmonic on the core (unless ``u`` vanishes identically).
    """
    scale = max(float(np.max(np.abs(u.values))), 1e-300)
    ring = u.closure() & ~u.mask
    if np.any(u.values[u.mask] > tolerance * scale):
        raise PreconditionViolated("u must be non-positive on the domain")
    if np.any(np.abs(u.values[ring]) > tolerance * scale):
        raise PreconditionViolated("u must vanish on the boundary of the domain")
    if np.any(u.values[u.mask] != 0.0):
        _check_psh(u, u.core(), "key proposition")
    return key_proposition_sides(u, tolerance)


def verify_key_lemma(u: BoxField, a: float, tolerance: float = 1e-9) -> AbpReport:
    """Check ``||u||_inf <= a + C diam^{4n} / a^{4n} ||u||_1 ||f||_inf^4``.

    The reduction runs the proposition on ``D' = {v < 0}`` with
    ``v = u - inf u - a``.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    n, d = u.n, u.d
    vals = u.values[u.mask]
    if np.any(vals >= 0.0):
        raise PreconditionViolated("u must be negative on the domain")
    core = u.core()
    _check_psh(u, core, "key lemma")
    inf_u = float(vals.min())
    sub = u.mask & (u.values < inf_u + a)
    if np.any(sub & ~core):
        raise SublevelTouchesBoundary(
            f"sublevel set {{u < inf u + {a}}} reaches the boundary layer of the domain"
        )
    v = np.where(u.mask, u.values - inf_u - a, 0.0)
    v_field = BoxField(n, np.minimum(v, 0.0), u.h, mask=sub, origin=u.origin)
    inner = key_proposition_sides(v_field, tolerance)

    dv = u.volume_element()
    sup_u = float(np.max(np.abs(vals)))
    u_l1 = float(np.sum(np.abs(vals)) * dv)
    diam = u.diameter()
    f = u.moore_density(core)
    f_inf = float(np.max(np.abs(f)))
    c_lem = lemma_constant(n)
    denom = diam**d / a**d * u_l1 * f_inf**4
    lemma_rhs = a + c_lem * denom
    return AbpReport(
        n=n,
        sup_u=sup_u,
        diam=diam,
        contact_points=inner.contact_points,
        contact_integral=inner.contact_integral,
        f_L4=float(np.sum(f**4) * dv) ** 0.25,
        f_inf=f_inf,
        u_L1=u_l1,
        abp_rhs=inner.abp_rhs,
        proposition_rhs=inner.proposition_rhs,
        abp_ratio=inner.abp_ratio,
        proposition_ratio=inner.proposition_ratio,
        pointwise_max_ratio=inner.pointwise_max_ratio,
        abp_holds=inner.abp_holds,
        pointwise_holds=inner.pointwise_holds,
        proposition_holds=inner.proposition_holds,
        a=float(a),
        lemma_rhs=lemma_rhs,
        lemma_ratio=_ratio(sup_u - a, denom),
        lemma_holds=bool(sup_u <= lemma_rhs + tolerance * sup_u),
        sublevel_volume=float(sub.sum()) * dv,
        sublevel_volume_bound=u_l1 / (sup_u - a) if sup_u > a else math.inf,
        constants=inner.constants,
        reduction=inner.as_dict(),
    )


@dataclass(frozen=True)
class WellInstance:
    """A psh well ``sum_i w_i (x_i - c_i)^2 - R^2 + eps cos(2 pi k.x + p)`` on ``[0, 1]^{4n}``.

    :meth:`proposition_field` clips to the domain ``{u < 0}`` (zero boundary
    values); :meth:`lemma_field` keeps ``u`` unclipped on ``D = {u < 0}``
    together with the sublevel depth ``a``.
    """

    n: int
    m: int
    radius: float
    center: tuple
    weights: tuple
    eps: float = 0.0
    mode: tuple = ()
    phase: float = 0.0
    depth: float = 0.5  # a = depth * radius**2

    def __call__(self, X):
        u = sum(w * (x - c) ** 2 for w, x, c in zip(self.weights, X, self.center)) - self.radius**2
        if self.eps:
            u = u + self.eps * np.cos(
                2 * np.pi * sum(k * x for k, x in zip(self.mode, X)) + self.phase
            )
        return u

    @property
    def a(self) -> float:
        return self.depth * self.radius**2

    def _raw(self) -> BoxField:
        return BoxField.from_function(self.n, self.m, self)

    def proposition_field(self) -> BoxField:
        u = self._raw()
        return BoxField.sublevel(self.n, u.values, u.h, origin=u.origin)

    def lemma_field(self) -> BoxField:
        u = self._raw()
        inner = BoxField(self.n, u.values, u.h, origin=u.origin).mask
        return BoxField(self.n, u.values, u.h, mask=(u.values < 0) & inner, origin=u.origin)


def quadratic_well(n: int = 1, m: int = 12, radius: float = 0.42, center: float = 0.5) -> WellInstance:
    """Isotropic calibration well ``|x - c|^2 - R^2`` with ``a = R^2 / 2``."""
    d = 4 * n
    return WellInstance(n, m, radius, (center,) * d, (1.0,) * d, depth=0.5)


def perturbed_well(seed: int, n: int = 1, m: int = 12) -> WellInstance:
    """Seeded anisotropic well with a small cosine perturbation; stays strictly psh.

    Parameter ranges keep the domain off the box shell and, at ``m = 12``,
    leave the lemma's sublevel set inside the stencil core of ``D``.
    """
    rng = np.random.default_rng(seed)
    d = 4 * n
    mode = tuple(int(k) for k in rng.integers(-1, 2, size=d))
    if not any(mode):
        mode = (1,) + mode[1:]
    return WellInstance(
        n=n,
        m=m,
        radius=float(rng.uniform(0.37, 0.39)),
        center=tuple(float(c) for c in 0.5 + rng.uniform(-0.005, 0.005, size=d)),
        weights=tuple(float(w) for w in rng.uniform(0.95, 1.06, size=d)),
        eps=float(rng.uniform(0.001, 0.004)),
        mode=mode,
        phase=float(rng.uniform(0, 2 * np.pi)),
        depth=0.32,
    )
