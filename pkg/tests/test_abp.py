import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quatma.abp import (
    POINTWISE_CONSTANT,
    BoxField,
    abp_constant,
    contact_set,
    key_proposition_sides,
    lemma_constant,
    perturbed_well,
    pointwise_det_ratios,
    proposition_constant,
    quadratic_well,
    random_psd_forms,
    verify_key_lemma,
    verify_key_proposition,
)
from quatma.calculus import su2_complement, random_form
from quatma.exceptions import PreconditionViolated, SublevelTouchesBoundary
from quatma.hyperhermitian import random_positive_definite, real_embedding


@pytest.fixture(scope="module")
def well():
    return quadratic_well()


def test_constants():
    # unit 4-ball has volume pi^2 / 2
    assert abp_constant(4) == pytest.approx((math.pi**2 / 2) ** -0.25)
    assert proposition_constant(1) == pytest.approx(abp_constant(4) * POINTWISE_CONSTANT[1] ** 0.25)
    assert lemma_constant(1) == pytest.approx(proposition_constant(1) ** 4)


def test_pointwise_ratio_on_invariant_and_degenerate_forms():
    rng = np.random.default_rng(0)
    P = real_embedding(random_positive_definite(2, 3))
    degenerate = np.diag([1.0] * 7 + [0.0])
    r = pointwise_det_ratios(np.stack([np.eye(8), P, degenerate]))
    assert r[0] == pytest.approx(1.0)
    assert r[1] == pytest.approx(1.0)
    assert r[2] == 0.0


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25)
def test_pointwise_inequality_with_non_invariant_part(seed):
    rng = np.random.default_rng(seed)
    P = real_embedding(random_positive_definite(1, seed % 1000, shift=0.5))
    Qp = su2_complement(random_form(1, rng)).S
    t = 1.0
    while np.linalg.eigvalsh(P + t * Qp)[0] <= 0:
        t *= 0.5
    assert pointwise_det_ratios((P + t * Qp)[None])[0] <= 1.0 + 1e-9


def test_batched_ratios_match_single():
    forms = random_psd_forms(2, 12, seed=4)
    batch = pointwise_det_ratios(forms)
    single = [pointwise_det_ratios(S[None])[0] for S in forms]
    assert np.allclose(batch, single)
    assert np.all(batch <= 1.0 + 1e-9)


def test_convex_contact_set_is_whole_core():
    u = BoxField.from_function(1, 7, lambda X: sum(x * x for x in X) - 1.0)
    assert contact_set(u).size == u.core().sum()


def test_affine_contact_set_is_whole_core():
    u = BoxField.from_function(1, 6, lambda X: X[0] - 2 * X[1] - 3.0)
    gamma = contact_set(u)
    assert gamma.size == u.core().sum()
    assert np.allclose(gamma.det_hessian, 0.0, atol=1e-8)


def test_concave_cap_is_not_in_contact_set():
    u = BoxField.from_function(1, 9, lambda X: np.cos(4 * np.pi * X[0]) + 0 * X[1])
    gamma = contact_set(u)
    idx = set(np.argwhere(gamma.mask)[:, 0])
    # the wells at t = 1/4, 3/4 touch from below, the cap at t = 1/2 does not
    assert {2, 6} <= idx and 4 not in idx


def test_proposition_on_well(well):
    rep = verify_key_proposition(well.proposition_field())
    assert rep.proposition_holds and rep.abp_holds and rep.pointwise_holds
    assert 0 < rep.proposition_ratio < 1.0
    assert rep.contact_points > 0


def test_lemma_on_well(well):
    rep = verify_key_lemma(well.lemma_field(), well.a)
    assert rep.lemma_holds
    assert rep.sublevel_volume <= rep.sublevel_volume_bound
    assert rep.reduction["proposition_holds"]


def test_perturbed_wells_satisfy_both():
    for seed in range(3):
        w = perturbed_well(seed)
        assert verify_key_proposition(w.proposition_field()).proposition_holds
        assert verify_key_lemma(w.lemma_field(), w.a).lemma_holds


def test_scaling_invariance(well):
    base = verify_key_proposition(well.proposition_field())
    scaled = verify_key_proposition(well.proposition_field().scaled(4.0))
    assert scaled.proposition_ratio == pytest.approx(base.proposition_ratio, rel=1e-9)
    assert scaled.abp_ratio == pytest.approx(base.abp_ratio, rel=1e-9)


def test_lemma_is_shift_invariant_in_inf(well):
    u = well.lemma_field()
    base = verify_key_lemma(u, well.a)
    deeper = verify_key_lemma(u.shifted(-0.3), well.a)
    assert deeper.sublevel_volume == base.sublevel_volume
    assert deeper.contact_points == base.contact_points


def test_padding_only_grows_the_bound(well):
    u = well.proposition_field()
    assert key_proposition_sides(u.padded(1)).proposition_rhs >= key_proposition_sides(u).proposition_rhs


def test_zero_function():
    u = BoxField(1, np.zeros((5,) * 4), 0.25)
    rep = verify_key_proposition(u)
    assert rep.sup_u == 0.0 and rep.proposition_holds


def test_preconditions(well):
    u = well.proposition_field()
    with pytest.raises(PreconditionViolated):
        verify_key_proposition(u.scaled(-1.0))
    with pytest.raises(PreconditionViolated):
        verify_key_lemma(well.lemma_field().shifted(1.0), well.a)
    with pytest.raises(SublevelTouchesBoundary):
        verify_key_lemma(well.lemma_field(), 10.0)
    with pytest.raises(ValueError):
        verify_key_lemma(well.lemma_field(), 0.0)
    concave = BoxField.sublevel(1, -well.proposition_field().values - 0.5, u.h)
    with pytest.raises(PreconditionViolated):
        verify_key_proposition(concave)
