"""Invariant suites behind ``quatma verify``.

Every suite is a pure function of its seed and returns a JSON-ready dict;
timings are kept out so reruns produce identical reports.
"""
from __future__ import annotations

import math

import numpy as np

from .abp import (
    BoxField,
    POINTWISE_CONSTANT,
    contact_set,
    key_proposition_sides,
    perturbed_well,
    pointwise_det_inequality,
    quadratic_well,
    verify_key_lemma,
    verify_key_proposition,
)
from .calculus import (
    calibrate_kappa,
    ddJ,
    haar_average_mc,
    random_form,
    right_action_matrix,
    su2_average,
    su2_complement,
)
from .exceptions import UnknownSuite
from .families import PlaneWaves, make_datum, quaternionic_from_real
from .grid import ScalarField, quaternionic_hessian_field
from .hyperhermitian import (
    HyperHermitianMatrix,
    moore_det,
    random_hyperhermitian,
    real_embedding_oracle,
)
from .quaternion import haar_sample_su2
from .solver import (
    SolverSettings,
    TorusProblem,
    linearized_residual,
    random_start,
    residual,
    solve,
    uniqueness_check,
)

__all__ = ["SUITES", "run_suite", "check"]


def check(name: str, value, threshold, passed: bool | None = None, relation: str = "<=") -> dict:
    """One named check; ``passed`` defaults to ``value <relation> threshold``."""
    if passed is None:
        passed = value <= threshold if relation == "<=" else value >= threshold
    return {
        "name": name,
        "value": value,
        "threshold": threshold,
        "relation": relation,
        "passed": bool(passed),
    }


# -- moore ------------------------------------------------------------------------

def moore_oracle_errors(count: int = 200, seed: int = 0) -> list[float]:
    """Normalized ``|det R(A) - P(A)^4| / max(1, ||A||)^{4n}`` over seeded matrices, n cycling 1..4."""
    errs = []
    for k in range(count):
        n = 1 + k % 4
        A = random_hyperhermitian(n, seed + k)
        scale = max(1.0, A.norm()) ** (4 * n)
        errs.append(abs(real_embedding_oracle(A) - moore_det(A) ** 4) / scale)
    return errs


def complex_restriction_errors(count: int = 50, seed: int = 0) -> list[float]:
    rng = np.random.default_rng(seed)
    errs = []
    for k in range(count):
        n = 1 + k % 4
        Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        Z = Z + Z.conj().T
        e = np.zeros((n, n, 4))
        e[..., 0], e[..., 1] = Z.real, Z.imag
        ref = float(np.linalg.det(Z).real)
        errs.append(abs(moore_det(e) - ref) / max(1.0, abs(ref)))
    return errs


def homogeneity_errors(count: int = 50, seed: int = 0) -> list[float]:
    rng = np.random.default_rng(seed)
    errs = []
    for k in range(count):
        n = 1 + k % 4
        A = random_hyperhermitian(n, seed + 1000 + k)
        lam = float(rng.uniform(-3.0, 3.0))
        p = moore_det(A)
        ref = lam**n * p
        errs.append(abs(moore_det(A * lam) - ref) / max(1.0, abs(ref)))
    return errs


def suite_moore(seed: int = 0) -> list[dict]:
    return [
        check("oracle_200", max(moore_oracle_errors(200, seed)), 1e-8),
        check("complex_restriction", max(complex_restriction_errors(50, seed)), 1e-10),
        check("homogeneity", max(homogeneity_errors(50, seed)), 1e-9),
        check("identity", abs(moore_det(HyperHermitianMatrix.identity(3)) - 1.0), 1e-14),
    ]


# -- calculus -----------------------------------------------------------------------

def four_point_vs_sampling(forms_per_n: int = 25, samples: int = 100_000, seed: int = 0,
                           method: str = "iid") -> list[float]:
    """Relative spectral-norm error of a sampled Haar average against the four-point formula."""
    rng = np.random.default_rng(seed)
    errs, k = [], 0
    for n in (1, 2):
        for _ in range(forms_per_n):
            Q = random_form(n, rng)
            est = haar_average_mc(Q, haar_sample_su2(seed + k, samples, method))
            exact = su2_average(Q).S
            errs.append(float(np.linalg.norm(est - exact, 2) / np.linalg.norm(Q.S, 2)))
            k += 1
    return errs


def suite_calculus(seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    # invariance of the four-point average under the right SU(2) action
    worst = 0.0
    for n in (1, 2, 3):
        Q = random_form(n, rng)
        avg = su2_average(Q).S
        for q in haar_sample_su2(seed + n, 5):
            R = right_action_matrix(q, n)
            worst = max(worst, float(np.max(np.abs(R.T @ avg @ R - avg))))
    out.append(check("average_invariant", worst, 1e-12))
    n_samples = 100_000
    out.append(check("sobol_vs_four_point",
                     max(four_point_vs_sampling(25, n_samples, seed, "sobol")), 2e-3))
    # plain Monte Carlo is held to its sampling law, not to the QMC tolerance
    out.append(check("iid_vs_four_point", max(four_point_vs_sampling(25, n_samples, seed, "iid")),
                     5.0 / math.sqrt(n_samples)))
    for n in (1, 2, 3):
        cal = calibrate_kappa(n, samples=20, seed=seed)
        spread = max(abs(r - cal.kappa) for r in cal.ratios) / abs(cal.kappa)
        out.append(check(f"kappa_constant_n{n}", spread, 1e-9))
        out.append(check(f"kappa_equals_factorial_n{n}",
                         abs(cal.kappa - math.factorial(n)) / math.factorial(n), 1e-9))
    worst = 0.0
    for n in (1, 2, 3):
        Qp = su2_complement(random_form(n, rng))
        worst = max(worst, float(np.max(np.abs(ddJ(Qp).M))))
    out.append(check("ddJ_kills_complement", worst, 1e-12))
    # lattice Hess_H converges to the exact one at second order
    waves = PlaneWaves.single(1.0, (1, 1, 0, 0)) + PlaneWaves.single(0.5, (0, 1, 0, 1))
    errs = []
    for N in (8, 16):
        f = ScalarField(1, N)
        X = f.coordinates()
        Hd = quaternionic_hessian_field(waves.value(X), 1, f.h)
        errs.append(float(np.max(np.abs(Hd - quaternionic_from_real(waves.hessian(X), 1)))))
    out.append(check("lattice_hessian_order", errs[0] / errs[1], 3.6, relation=">="))
    return out


# -- abp ----------------------------------------------------------------------------

def suite_abp(seed: int = 0) -> list[dict]:
    out = []
    for n in (1, 2):
        c = pointwise_det_inequality(n, 10_000, seed + 1, check=False)
        out.append(check(f"pointwise_n{n}", c, POINTWISE_CONSTANT[n] * (1 + 1e-9)))
    well = quadratic_well()
    prop = verify_key_proposition(well.proposition_field())
    lem = verify_key_lemma(well.lemma_field(), well.a)
    out.append(check("well_proposition", prop.proposition_ratio, 1.0))
    out.append(check("well_abp", prop.abp_ratio, 1.0))
    out.append(check("well_lemma", lem.lemma_ratio, 1.0))
    failures = 0
    for k in range(12):
        w = perturbed_well(seed + k)
        p = verify_key_proposition(w.proposition_field())
        lm = verify_key_lemma(w.lemma_field(), w.a)
        failures += not (p.proposition_holds and p.abp_holds and lm.lemma_holds)
    out.append(check("perturbed_wells_failures", failures, 0))
    lam = 3.0
    p3 = verify_key_proposition(well.proposition_field().scaled(lam))
    l3 = verify_key_lemma(well.lemma_field().scaled(lam), lam * well.a)
    drift = max(
        abs(p3.proposition_ratio - prop.proposition_ratio) / prop.proposition_ratio,
        abs(p3.abp_ratio - prop.abp_ratio) / prop.abp_ratio,
        abs(l3.lemma_ratio - lem.lemma_ratio) / lem.lemma_ratio,
    )
    out.append(check("scaling_invariance", drift, 1e-9))
    u = well.proposition_field()
    base = key_proposition_sides(u).proposition_rhs
    grown = key_proposition_sides(u.padded(1)).proposition_rhs
    out.append(check("padding_monotone", grown - base, 0.0, relation=">="))
    m = 7
    convex = BoxField.from_function(1, m, lambda X: sum(x * x for x in X) - 1.0)
    gamma = contact_set(convex)
    out.append(check("convex_contact_all", int(gamma.size), int(convex.core().sum()), relation=">="))
    return out


# -- solver ---------------------------------------------------------------------------

def cosine_oracle(N: int, eps: float, kmax: int = 40) -> np.ndarray:
    """Continuum solution of ``Delta phi / 4 = A e^{eps cos 2 pi t} - 1`` sampled on the lattice."""
    from scipy.special import iv

    t = np.arange(N) / N
    phi = np.zeros(N)
    for k in range(1, kmax + 1):
        phi -= 8.0 * iv(k, eps) / (iv(0, eps) * (2 * math.pi * k) ** 2) * np.cos(2 * math.pi * k * t)
    return phi


def manufactured_errors(n: int, N: int, settings: SolverSettings | None = None):
    F, target = make_datum(n, N, {"family": "manufactured"})
    rep = solve(TorusProblem(F), settings)
    exact = target.field(n, N).values
    err = rep.phi.values - exact
    err -= np.mean(err)
    f = ScalarField(n, N)
    X = f.coordinates()
    stencil = float(np.max(np.abs(
        quaternionic_hessian_field(exact, n, f.h) - quaternionic_from_real(target.hessian(X), n)
    )))
    return rep, float(np.max(np.abs(err))), stencil


def suite_solver(seed: int = 0) -> list[dict]:
    out = []
    for n in (1, 2):
        rep = solve(TorusProblem(ScalarField(n, 4)))
        out.append(check(f"zero_datum_n{n}", max(rep.normphi_inf, abs(rep.A - 1.0)), 1e-12))
    errs = []
    for N in (8, 16):
        F, _ = make_datum(1, N, {"family": "cosine", "params": {"amplitude": 0.5}})
        rep = solve(TorusProblem(F))
        oracle = np.broadcast_to(cosine_oracle(N, 0.5).reshape((N, 1, 1, 1)), F.shape)
        e = rep.phi.values - oracle
        errs.append(float(np.max(np.abs(e - np.mean(e)))))
    out.append(check("cosine_oracle_order", errs[0] / errs[1], 3.6, relation=">="))
    e1 = []
    for N in (8, 16):
        rep, err, _ = manufactured_errors(1, N)
        e1.append(err)
    out.append(check("manufactured_order_n1", e1[0] / e1[1], 3.6, relation=">="))
    out.append(check("residual_n1", rep.residual, 1e-8))
    F, _ = make_datum(1, 8, {"family": "bump", "params": {"amplitude": 0.5}})
    out.append(check("uniqueness_n1", uniqueness_check(TorusProblem(F), [seed, seed + 1, seed + 2]), 1e-7))
    rep2, err2, stencil2 = manufactured_errors(2, 4)
    out.append(check("manufactured_n2", err2, 5.0 * stencil2))
    out.append(check("residual_n2", rep2.residual, 1e-6))
    out.append(check("mass_balance_n2", rep2.mass_balance, 1e-6))
    out.append(check("psh_margin_n2", rep2.psh_margin, 0.0, relation=">=",
                     passed=rep2.psh_margin > 0.0))
    # linearization against central differences
    problem = TorusProblem(make_datum(2, 4, {"family": "cosine", "params": {"amplitude": 0.2}})[0])
    phi = random_start(2, 4, seed, 0.2).values
    dphi = random_start(2, 4, seed + 1, 1.0).values
    step = 1e-5 * max(1.0, float(np.max(np.abs(phi))))
    fd = (residual(problem, phi + step * dphi, 1.0).values
          - residual(problem, phi - step * dphi, 1.0).values) / (2 * step)
    lin = linearized_residual(problem, phi, dphi).values
    out.append(check("linearization_fd", float(np.max(np.abs(fd - lin)) / np.max(np.abs(lin))), 1e-6))
    gauge = float(np.max(np.abs(residual(problem, phi, 1.0).values - residual(problem, phi + 3.5, 1.0).values)))
    # exact in exact arithmetic; adding 3.5 only perturbs the difference rounding
    out.append(check("gauge_invariance", gauge, 1e-10))
    return out


SUITES = {
    "moore": suite_moore,
    "calculus": suite_calculus,
    "abp": suite_abp,
    "solver": suite_solver,
}


def run_suite(name: str, seed: int = 0) -> dict:
    """Run a suite (or ``"all"``) and return the JSON-ready summary."""
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise UnknownSuite(f"unknown suite {name!r}; expected one of {sorted(SUITES) + ['all']}")
    suites = {}
    for nm in names:
        checks = SUITES[nm](seed)
        suites[nm] = {"passed": all(c["passed"] for c in checks), "checks": checks}
    return {
        "suite": name,
        "seed": seed,
        "passed": all(s["passed"] for s in suites.values()),
        "suites": suites,
    }
