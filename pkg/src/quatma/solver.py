"""Newton solver for the flat quaternionic Calabi equation on ``(R/Z)^{4n}``.

The discrete problem is

    moore_det(Id + Hess_H phi) = A * exp(F)

at every lattice point, with ``phi`` periodic and ``A > 0`` unknown.  Each
Newton step solves the bordered system

    [ L   -e^F ] [dphi]   [-G]
    [ mean  0  ] [ dA ] = [ 0]

with GMRES, preconditioned by the constant-coefficient operator obtained from
lattice-averaged cofactors and inverted by FFT.  The last row keeps the
mean-zero gauge; the constant mode is the kernel of ``L``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls
from scipy.sparse.linalg import LinearOperator, gmres
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_grid
from .exceptions import LinearSolveStalled, MaxIterationsExceeded, NotPsh
from .grid import ScalarField, quaternionic_hessian_field
from .hyperhermitian import moore_det_field
from .calculus import _hermitian_min_eig

__all__ = [
    "SolverSettings",
    "TorusProblem",
    "SolveReport",
    "SweepRecord",
    "SweepResult",
    "moore_det_field",
    "residual",
    "linearized_residual",
    "solve",
    "uniqueness_check",
    "random_start",
    "c0_sweep",
    "CalabiSolver",
]

logger = logging.getLogger(__name__)

CONTINUATION_STEPS = (0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class SolverSettings:
    """Newton settings; ``tol=None`` picks 1e-8 for n = 1 and 1e-6 for n = 2."""

    tol: float | None = None
    max_iters: int = 50
    margin: float = 1e-3
    inner_tol: float = 1e-10
    continuation: bool = True

    def tolerance(self, n: int) -> float:
        if self.tol is not None:
            return float(self.tol)
        return 1e-8 if n == 1 else 1e-6


@dataclass
class TorusProblem:
    """Datum ``F`` on the lattice; background is the flat identity form.

    ``A`` is filled in by :func:`solve`.
    """

    F: ScalarField
    A: float | None = None

    def __post_init__(self):
        if self.F.n not in (1, 2):
            raise ValueError("the solver supports n in {1, 2}")
        check_grid(self.F.N)

    @property
    def n(self) -> int:
        return self.F.n

    @property
    def N(self) -> int:
        return self.F.N

    @classmethod
    def from_values(cls, n: int, N: int, values) -> "TorusProblem":
        return cls(ScalarField(n, N, values))


@dataclass
class SolveReport:
    phi: ScalarField
    A: float
    residual_history: list
    iterations: int
    converged: bool
    normphi_inf: float
    normphi_L1: float
    psh_margin: float
    max_location: tuple
    mass_balance: float
    tol: float
    linear_iterations: list = field(default_factory=list)
    continuation: list | None = None
    status: str = "converged"

    @property
    def residual(self) -> float:
        return self.residual_history[-1]

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "n": self.phi.n,
            "N": self.phi.N,
            "A": self.A,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
            "residual_history": list(self.residual_history),
            "linear_iterations": list(self.linear_iterations),
            "normphi_inf": self.normphi_inf,
            "normphi_L1": self.normphi_L1,
            "psh_margin": self.psh_margin,
            "max_location": list(self.max_location),
            "mass_balance": self.mass_balance,
            "tol": self.tol,
            "continuation": self.continuation,
        }


# -- pointwise algebra --------------------------------------------------------

def _shifted(H: np.ndarray) -> np.ndarray:
    n = H.shape[0]
    M = H.copy()
    M[np.arange(n), np.arange(n), 0] += 1.0
    return M


def _det_derivative(M: np.ndarray, dH: np.ndarray) -> np.ndarray:
    # d det[[a, q], [conj q, c]] = c da + a dc - 2 Re(conj(q) dq)
    if M.shape[0] == 1:
        return dH[0, 0, 0]
    a, c, q = M[0, 0, 0], M[1, 1, 0], M[0, 1]
    return c * dH[0, 0, 0] + a * dH[1, 1, 0] - 2.0 * np.sum(q * dH[0, 1], axis=0)


def _state(problem: TorusProblem, phi_values: np.ndarray):
    M = _shifted(quaternionic_hessian_field(phi_values, problem.n, problem.F.h))
    return M, moore_det_field(M), _hermitian_min_eig(M)


def _check_psh(margins: np.ndarray, threshold: float = 0.0):
    idx = np.unravel_index(int(np.argmin(margins)), margins.shape)
    worst = float(margins[idx])
    if worst <= threshold:
        raise NotPsh(
            f"Id + Hess_H phi loses positivity: min eigenvalue {worst:.3e} at {idx}",
            worst_index=tuple(int(i) for i in idx),
            margin=worst,
        )
    return worst, tuple(int(i) for i in idx)


def mass_balance_A(problem: TorusProblem, phi) -> float:
    values = phi.values if isinstance(phi, ScalarField) else np.asarray(phi)
    _, det, _ = _state(problem, values)
    return float(np.mean(det) / np.mean(np.exp(problem.F.values)))


def residual(problem: TorusProblem, phi, A: float | None = None) -> ScalarField:
    """Pointwise ``moore_det(Id + Hess_H phi) - A e^F``.

    ``A`` defaults to ``problem.A`` and then to the mass-balance value.

    Raises
    ------
    NotPsh
        If ``Id + Hess_H phi`` is not positive definite at some lattice point.
    """
    values = phi.values if isinstance(phi, ScalarField) else np.asarray(phi, dtype=float)
    M, det, margins = _state(problem, values)
    _check_psh(margins)
    if A is None:
        A = problem.A
    if A is None:
        A = float(np.mean(det) / np.mean(np.exp(problem.F.values)))
    return ScalarField(problem.n, problem.N, det - A * np.exp(problem.F.values))


def linearized_residual(problem: TorusProblem, phi, dphi) -> ScalarField:
    """Directional derivative of ``moore_det(Id + Hess_H phi)`` along ``dphi``."""
    values = phi.values if isinstance(phi, ScalarField) else np.asarray(phi, dtype=float)
    dvalues = dphi.values if isinstance(dphi, ScalarField) else np.asarray(dphi, dtype=float)
    M, _, _ = _state(problem, values)
    dH = quaternionic_hessian_field(dvalues, problem.n, problem.F.h)
    return ScalarField(problem.n, problem.N, _det_derivative(M, dH))


# -- linear algebra -------------------------------------------------------------

class _FourierPreconditioner:
    """Inverse of ``sum_a w_a * Laplacian_a / 4`` on mean-zero periodic fields."""

    def __init__(self, n: int, N: int, weights):
        h = 1.0 / N
        lam = (2.0 * np.cos(2.0 * np.pi * np.arange(N) / N) - 2.0) / (h * h)
        d = 4 * n
        symbol = np.zeros((N,) * d)
        for axis in range(d):
            shape = [1] * d
            shape[axis] = N
            symbol = symbol + 0.25 * weights[axis // 4] * lam.reshape(shape)
        symbol.flat[0] = 1.0
        self.inverse = 1.0 / symbol
        self.inverse.flat[0] = 0.0

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return np.real(np.fft.ifftn(np.fft.fftn(r) * self.inverse))


def _newton_direction(problem, M, G, expF, inner_tol):
    n, shape = problem.n, problem.F.shape
    size = G.size
    h = problem.F.h
    mean_expF = float(np.mean(expF))

    def matvec(x):
        x = np.asarray(x).ravel()
        dphi = x[:size].reshape(shape)
        dH = quaternionic_hessian_field(dphi, n, h)
        out = np.empty(size + 1)
        out[:size] = (_det_derivative(M, dH) - x[size] * expF).ravel()
        out[size] = np.mean(dphi)
        return out

    if n == 1:
        weights = [1.0]
    else:
        # cofactors of the diagonal entries, averaged over the lattice
        weights = [float(np.mean(M[1, 1, 0])), float(np.mean(M[0, 0, 0]))]
    P = _FourierPreconditioner(n, problem.N, weights)

    def precondition(y):
        y = np.asarray(y).ravel()
        r = y[:size].reshape(shape)
        dA = -float(np.mean(r)) / mean_expF
        rhs = r + dA * expF
        rhs = rhs - np.mean(rhs)
        out = np.empty(size + 1)
        out[:size] = (P(rhs) + y[size]).ravel()
        out[size] = dA
        return out

    op = LinearOperator((size + 1, size + 1), matvec=matvec, dtype=float)
    pre = LinearOperator((size + 1, size + 1), matvec=precondition, dtype=float)
    b = np.concatenate([-G.ravel(), [0.0]])
    counter = {"k": 0}

    def count(_):
        counter["k"] += 1

    x, info = gmres(
        op, b, rtol=inner_tol, atol=0.0, restart=60, maxiter=20, M=pre,
        callback=count, callback_type="pr_norm",
    )
    bnorm = float(np.linalg.norm(b))
    rel = float(np.linalg.norm(b - matvec(x))) / bnorm if bnorm > 0 else 0.0
    if info < 0 or rel > 1e-6:
        raise LinearSolveStalled(f"GMRES stalled at relative residual {rel:.3e} (info={info})")
    return x[:size].reshape(shape), float(x[size]), counter["k"]


# -- Newton iteration ----------------------------------------------------------

def _newton(problem: TorusProblem, phi0: np.ndarray, settings: SolverSettings):
    tol = settings.tolerance(problem.n)
    expF = np.exp(problem.F.values)
    phi = phi0 - np.mean(phi0)
    M, det, margins = _state(problem, phi)
    _check_psh(margins, settings.margin)
    A = float(np.mean(det) / np.mean(expF))
    G = det - A * expF
    res = float(np.max(np.abs(G)))
    history, inner = [res], []
    steps = 0
    while res >= tol:
        if steps >= settings.max_iters:
            raise MaxIterationsExceeded(
                f"no convergence after {steps} Newton steps (residual {res:.3e})"
            )
        dphi, dA, k = _newton_direction(problem, M, G, expF, settings.inner_tol)
        inner.append(k)
        t, accepted, worst = 1.0, None, None
        while t >= 2.0**-10:
            trial = phi + t * dphi
            Mt, dt, mt = _state(problem, trial)
            worst = float(np.min(mt))
            if worst >= settings.margin:
                At = A + t * dA
                Gt = dt - At * expF
                rt = float(np.max(np.abs(Gt)))
                if rt < res or accepted is None:
                    accepted = (trial, Mt, dt, At, Gt, rt)
                if rt < res:
                    break
            t *= 0.5
        if accepted is None:
            raise NotPsh(
                f"line search could not keep the psh margin {settings.margin:g} (best {worst:.3e})",
                margin=worst,
            )
        phi, M, det, A, G, res = accepted
        phi = phi - np.mean(phi)
        history.append(res)
        steps += 1
        logger.debug("newton step %d: t=%g residual=%.3e", steps, t, res)
    return phi, A, history, steps, inner


def _finish(problem, phi, A, history, steps, inner, tol, continuation=None) -> SolveReport:
    idx = np.unravel_index(int(np.argmax(phi)), phi.shape)
    phi = phi - phi[idx]
    M, det, margins = _state(problem, phi)
    margin, _ = _check_psh(margins)
    field_ = ScalarField(problem.n, problem.N, phi)
    mass = abs(float(np.mean(det)) - A * float(np.mean(np.exp(problem.F.values))))
    return SolveReport(
        phi=field_,
        A=float(A),
        residual_history=[float(r) for r in history],
        iterations=steps,
        converged=True,
        normphi_inf=field_.sup_norm(),
        normphi_L1=field_.l1_norm(),
        psh_margin=margin,
        max_location=tuple(int(i) for i in idx),
        mass_balance=mass,
        tol=tol,
        linear_iterations=list(inner),
        continuation=continuation,
    )


def solve(problem: TorusProblem, settings: SolverSettings | None = None, phi0=None) -> SolveReport:
    """Solve ``moore_det(Id + Hess_H phi) = A e^F`` for ``(phi, A)``.

    Starts from ``phi0`` (default zero).  If the direct Newton run cannot keep
    the psh margin, continuation over ``s F`` for ``s`` in 1/4, 1/2, 3/4, 1 is
    tried, each stage reusing the previous potential.  On success
    ``problem.A`` is set and ``phi`` is shifted to ``max phi = 0``.
    """
    settings = settings or SolverSettings()
    tol = settings.tolerance(problem.n)
    start = np.zeros(problem.F.shape) if phi0 is None else np.asarray(
        phi0.values if isinstance(phi0, ScalarField) else phi0, dtype=float
    )
    try:
        phi, A, history, steps, inner = _newton(problem, start, settings)
        continuation = None
    except NotPsh:
        if not settings.continuation:
            raise
        logger.info("direct solve lost the psh margin; switching to continuation")
        phi, history, steps, inner = start, [], 0, []
        for s in CONTINUATION_STEPS:
            stage = TorusProblem(ScalarField(problem.n, problem.N, s * problem.F.values))
            phi, A, h_s, k_s, i_s = _newton(stage, phi, settings)
            history.extend(h_s)
            steps += k_s
            inner.extend(i_s)
        continuation = list(CONTINUATION_STEPS)
    problem.A = float(A)
    return _finish(problem, phi, A, history, steps, inner, tol, continuation)


# -- harnesses ------------------------------------------------------------------

def random_start(n: int, N: int, seed: int, size: float = 0.2, modes: int = 3) -> ScalarField:
    """Seeded smooth initial guess from a few random low-frequency cosines.

    Scaled so the largest entry of its lattice Hess_H is ``size``, which keeps
    ``Id + Hess_H phi0`` positive definite for ``size < 1/3``.
    """
    rng = np.random.default_rng(seed)
    f = ScalarField(n, N)
    X = f.coordinates()
    values = np.zeros(f.shape)
    for _ in range(modes):
        k = rng.integers(-1, 2, size=4 * n)
        if not k.any():
            k[0] = 1
        phase = rng.uniform(0, 2 * np.pi)
        values = values + rng.standard_normal() * np.cos(
            2 * np.pi * sum(int(ka) * x for ka, x in zip(k, X)) + phase
        )
    hmax = float(np.max(np.abs(quaternionic_hessian_field(values, n, f.h))))
    return f.with_values(size * values / hmax)


def uniqueness_check(problem: TorusProblem, seeds, settings: SolverSettings | None = None,
                     size: float = 0.2) -> float:
    """Solve from several seeded random starts; max pairwise sup deviation after mean alignment."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("need at least two starts")
    sols = []
    for seed in seeds:
        start = random_start(problem.n, problem.N, seed, size)
        rep = solve(TorusProblem(problem.F), settings, phi0=start)
        v = rep.phi.values
        sols.append(v - np.mean(v))
    worst = 0.0
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            worst = max(worst, float(np.max(np.abs(sols[i] - sols[j]))))
    return worst


@dataclass
class SweepRecord:
    s: float
    normF_inf: float
    normphi_inf: float
    normphi_L1: float
    A: float
    iters: int
    residual: float
    continuation: bool = False

    CSV_COLUMNS = ("s", "normF_inf", "normphi_inf", "normphi_L1", "A", "iters", "residual")

    def csv_row(self) -> list:
        return [getattr(self, c) for c in self.CSV_COLUMNS]

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in self.CSV_COLUMNS} | {"continuation": self.continuation}


@dataclass
class SweepResult:
    """Sweep records plus the upper envelope ``c1 + c2 * exp(4 ||F_s||_inf)``."""

    records: list
    c1: float
    c2: float
    fit_residuals: list
    slack: list
    l1_slack: list

    def envelope(self, normF: float) -> float:
        return self.c1 + self.c2 * float(np.exp(4.0 * normF))

    @property
    def dominates(self) -> bool:
        return all(s >= 0.0 for s in self.slack)

    @property
    def l1_bounded(self) -> bool:
        return all(s >= 0.0 for s in self.l1_slack)

    @property
    def monotone(self) -> bool:
        vals = [r.normphi_inf for r in self.records]
        return all(b >= a for a, b in zip(vals, vals[1:]))

    def as_dict(self) -> dict:
        return {
            "records": [r.as_dict() for r in self.records],
            "c1": self.c1,
            "c2": self.c2,
            "fit_residuals": list(self.fit_residuals),
            "slack": list(self.slack),
            "l1_slack": list(self.l1_slack),
            "dominates": self.dominates,
            "l1_bounded": self.l1_bounded,
            "monotone": self.monotone,
        }


def fit_envelope(normF, normphi) -> tuple[float, float, list]:
    """Nonnegative least squares for ``y ~ c1 + c2 exp(4 x)``, then lift ``c1`` to an upper envelope."""
    x = np.exp(4.0 * np.asarray(normF, dtype=float))
    y = np.asarray(normphi, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    (c1, c2), _ = nnls(design, y)
    fitted = c1 + c2 * x
    residuals = (y - fitted).tolist()
    c1 += max(0.0, float(np.max(y - fitted)))
    return float(c1), float(c2), residuals


def c0_sweep(base_F: ScalarField, scales, settings: SolverSettings | None = None) -> SweepResult:
    """Solve for ``F_s = s * base_F`` over sorted, deduplicated scales and fit the envelope.

    Each solve starts from the previous potential.
    """
    scales = sorted({float(s) for s in scales})
    if not scales:
        raise ValueError("no scales given")
    records, phi = [], None
    for s in scales:
        problem = TorusProblem(ScalarField(base_F.n, base_F.N, s * base_F.values))
        rep = solve(problem, settings, phi0=phi)
        phi = rep.phi
        records.append(SweepRecord(
            s=s,
            normF_inf=problem.F.sup_norm(),
            normphi_inf=rep.normphi_inf,
            normphi_L1=rep.normphi_L1,
            A=rep.A,
            iters=rep.iterations,
            residual=rep.residual,
            continuation=rep.continuation is not None,
        ))
    normF = [r.normF_inf for r in records]
    c1, c2, fit_res = fit_envelope(normF, [r.normphi_inf for r in records])
    env = [c1 + c2 * float(np.exp(4.0 * f)) for f in normF]
    slack = [e - r.normphi_inf for e, r in zip(env, records)]
    l1_slack = [e - r.normphi_L1 for e, r in zip(env, records)]
    return SweepResult(records, c1, c2, fit_res, slack, l1_slack)


# -- estimator facade -------------------------------------------------------------

class CalabiSolver(BaseEstimator):
    """Estimator-style wrapper around :func:`solve`.

    ``fit(F)`` takes the datum as a :class:`ScalarField` or an array of shape
    ``(N,) * 4n`` and stores ``phi_``, ``A_`` and ``report_``.

    Parameters
    ----------
    n : int
        Quaternionic dimension (1 or 2).
    tol : float or None
        Residual sup-norm tolerance; ``None`` uses the dimension default.
    max_iters : int
    margin : float
        Minimum eigenvalue of ``Id + Hess_H phi`` kept by the line search.
    continuation : bool
    """

    def __init__(self, n=1, tol=None, max_iters=50, margin=1e-3, continuation=True):
        self.n = n
        self.tol = tol
        self.max_iters = max_iters
        self.margin = margin
        self.continuation = continuation

    def _settings(self) -> SolverSettings:
        return SolverSettings(
            tol=self.tol, max_iters=self.max_iters, margin=self.margin,
            continuation=self.continuation,
        )

    def _as_field(self, F) -> ScalarField:
        if isinstance(F, ScalarField):
            if F.n != self.n:
                raise ValueError(f"F has n={F.n}, estimator has n={self.n}")
            return F
        F = np.asarray(F, dtype=float)
        if F.ndim != 4 * self.n or len(set(F.shape)) != 1:
            raise ValueError(f"F must be a cubic array with {4 * self.n} axes")
        if not np.all(np.isfinite(F)):
            raise ValueError("F contains non-finite values")
        return ScalarField(self.n, F.shape[0], F)

    def fit(self, F, y=None, phi0=None):
        problem = TorusProblem(self._as_field(F))
        self.report_ = solve(problem, self._settings(), phi0=phi0)
        self.phi_ = self.report_.phi.values
        self.A_ = self.report_.A
        return self

    def residual(self, F) -> np.ndarray:
        check_is_fitted(self, "phi_")
        problem = TorusProblem(self._as_field(F))
        return residual(problem, self.phi_, self.A_).values

