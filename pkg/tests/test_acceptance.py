"""Acceptance criteria, one test each, at the stated tolerances and runtime budgets.

Every test prints a single ``ACCEPTANCE <name>: PASS|FAIL | detail`` line and
the terminal summary repeats them.
"""
import json
import math
import time

import numpy as np
import pytest

from quatma import cli
from quatma.abp import (
    POINTWISE_CONSTANT,
    perturbed_well,
    pointwise_det_inequality,
    quadratic_well,
    verify_key_lemma,
    verify_key_proposition,
)
from quatma.calculus import calibrate_kappa
from quatma.families import make_datum
from quatma.solver import SolverSettings, TorusProblem, c0_sweep, uniqueness_check
from quatma.suites import (
    complex_restriction_errors,
    four_point_vs_sampling,
    homogeneity_errors,
    manufactured_errors,
    moore_oracle_errors,
)


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_moore_oracle(record_acceptance):
    with Clock() as clock:
        oracle = max(moore_oracle_errors(200, seed=11))
        restriction = max(complex_restriction_errors(50, seed=11))
        homogeneity = max(homogeneity_errors(50, seed=11))
    ok = oracle <= 1e-8 and restriction <= 1e-10 and homogeneity <= 1e-9 and clock.elapsed < 10
    detail = (f"oracle {oracle:.2e} <= 1e-8, complex {restriction:.2e} <= 1e-10, "
              f"homogeneity {homogeneity:.2e} <= 1e-9, {clock.elapsed:.1f} s < 10 s")
    assert record_acceptance("moore_oracle", ok, detail)


def test_su2_averaging_monte_carlo(record_acceptance):
    with Clock() as clock:
        errs = four_point_vs_sampling(forms_per_n=25, samples=100_000, seed=21, method="iid")
    worst = max(errs)
    ok = len(errs) >= 50 and worst <= 2e-3 and clock.elapsed < 30
    detail = (f"{len(errs)} forms, i.i.d. Haar 1e5 samples: max rel err {worst:.2e} "
              f"(mean {np.mean(errs):.2e}) vs 2e-3, {clock.elapsed:.1f} s < 30 s")
    assert record_acceptance("su2_averaging", ok, detail)


def test_density_identity(record_acceptance):
    parts, ok = [], True
    with Clock() as clock:
        for n in (1, 2, 3):
            cal = calibrate_kappa(n, samples=20, seed=31)
            spread = max(abs(r - cal.kappa) for r in cal.ratios) / abs(cal.kappa)
            ok &= spread <= 1e-9 and len(cal.ratios) >= 20
            parts.append(f"n={n}: kappa {cal.kappa:.12g} (n!/4^n = {math.factorial(n) / 4**n:.6g}, "
                         f"factor {cal.discrepancy_factor:.6g}), spread {spread:.1e}")
    ok &= clock.elapsed < 10
    assert record_acceptance("density_identity", ok, "; ".join(parts) + f"; {clock.elapsed:.1f} s < 10 s")


def test_pointwise_abp(record_acceptance):
    with Clock() as clock:
        c1 = pointwise_det_inequality(1, 10_000, seed=41, check=False)
        c2 = pointwise_det_inequality(2, 10_000, seed=42, check=False)
    ok = c1 <= 1 + 1e-9 and c2 <= POINTWISE_CONSTANT[2] * (1 + 1e-6) and clock.elapsed < 60
    detail = (f"n=1 max {c1!r} <= 1 + 1e-9; n=2 max {c2!r} vs pinned {POINTWISE_CONSTANT[2]!r}; "
              f"{clock.elapsed:.1f} s < 60 s")
    assert record_acceptance("pointwise_abp", ok, detail)


def test_proposition_and_lemma(record_acceptance):
    lam = 3.0
    with Clock() as clock:
        well = quadratic_well(1, 12)
        prop = verify_key_proposition(well.proposition_field())
        lem = verify_key_lemma(well.lemma_field(), well.a)
        prop3 = verify_key_proposition(well.proposition_field().scaled(lam))
        lem3 = verify_key_lemma(well.lemma_field().scaled(lam), lam * well.a)
        held = [prop.proposition_holds and prop.abp_holds and lem.lemma_holds]
        prop_ratios = [prop.proposition_ratio]
        for seed in range(10):
            w = perturbed_well(seed, 1, 12)
            p = verify_key_proposition(w.proposition_field())
            lm = verify_key_lemma(w.lemma_field(), w.a)
            held.append(p.proposition_holds and p.abp_holds and lm.lemma_holds)
            prop_ratios.append(p.proposition_ratio)
    drift = max(
        abs(prop3.proposition_ratio / prop.proposition_ratio - 1),
        abs(prop3.abp_ratio / prop.abp_ratio - 1),
        abs(lem3.lemma_ratio / lem.lemma_ratio - 1),
    )
    ok = all(held) and drift <= 1e-9 and clock.elapsed < 120
    detail = (f"{sum(held)}/{len(held)} instances hold, proposition ratio max {max(prop_ratios):.4f}, "
              f"lemma ratio {lem.lemma_ratio:.3e}, scaling drift {drift:.1e}, {clock.elapsed:.1f} s < 120 s")
    assert record_acceptance("proposition_lemma", ok, detail)


def test_solver_n1(record_acceptance):
    with Clock() as clock:
        _, e8, _ = manufactured_errors(1, 8)
        rep, e16, _ = manufactured_errors(1, 16)
        F, _ = make_datum(1, 16, {"family": "manufactured"})
        spread = uniqueness_check(TorusProblem(F), [1, 2, 3])
    ratio = e8 / e16
    ok = ratio >= 3.6 and rep.residual < 1e-8 and spread < 1e-7 and clock.elapsed < 120
    detail = (f"error N=8 {e8:.3e}, N=16 {e16:.3e}, ratio {ratio:.3f} >= 3.6; residual {rep.residual:.1e}; "
              f"uniqueness {spread:.1e} < 1e-7; {clock.elapsed:.1f} s < 120 s")
    assert record_acceptance("solver_n1", ok, detail)


def _solver_n2(N):
    rep, err, stencil = manufactured_errors(2, N)
    expF = np.exp(make_datum(2, N, {"family": "manufactured"})[0].values)
    return rep, err, stencil, expF


def test_solver_n2(record_acceptance):
    with Clock() as clock:
        rep, err, stencil, expF = _solver_n2(4)
    ok = (err <= 5 * stencil and rep.residual < 1e-6 and rep.mass_balance < 1e-6
          and rep.psh_margin > 0)
    detail = (f"N=4 error {err:.3e} <= 5 x stencil {stencil:.3e}; residual {rep.residual:.1e}; "
              f"mass balance {rep.mass_balance:.1e}; margin {rep.psh_margin:.3e}; {clock.elapsed:.1f} s")
    assert record_acceptance("solver_n2", ok, detail)


@pytest.mark.stress
def test_solver_n2_stress(record_acceptance):
    with Clock() as clock:
        rep, err, stencil, _ = _solver_n2(6)
    ok = rep.converged and err <= 5 * stencil and clock.elapsed < 900
    detail = f"N=6 error {err:.3e} vs 5 x {stencil:.3e}, residual {rep.residual:.1e}, {clock.elapsed:.0f} s < 900 s"
    assert record_acceptance("solver_n2_stress", ok, detail)


def test_c0_sweep(record_acceptance):
    with Clock() as clock:
        F, _ = make_datum(1, 16, {"family": "cosine"})
        res = c0_sweep(F, [0.0, 0.25, 0.5, 0.75, 1.0], SolverSettings(continuation=True))
    converged = all(r.residual < 1e-8 for r in res.records)
    ok = converged and res.l1_bounded and res.dominates and clock.elapsed < 300
    detail = (f"c1 {res.c1:.4g}, c2 {res.c2:.4g}; min sup slack {min(res.slack):.2e}, "
              f"min L1 slack {min(res.l1_slack):.2e}; all converged {converged}; {clock.elapsed:.1f} s < 300 s")
    assert record_acceptance("c0_sweep", ok, detail)


def test_reproducibility(record_acceptance, tmp_path):
    reports, manifests, codes = [], [], []
    for run in ("a", "b"):
        out = tmp_path / run
        codes.append(cli.main(["verify", "all", "--seed", "0", "--out", str(out), "--quiet"]))
        reports.append((out / "verify_all.json").read_bytes())
        m = json.loads((out / "manifest.json").read_text())
        m.pop("timings")
        manifests.append(m)
    ok = reports[0] == reports[1] and manifests[0] == manifests[1] and codes[0] == codes[1]
    detail = f"verify all x2: reports identical {reports[0] == reports[1]}, manifests equal modulo timings {manifests[0] == manifests[1]}, exit codes {codes}"
    assert record_acceptance("reproducibility", ok, detail)
