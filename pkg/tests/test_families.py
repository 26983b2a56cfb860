import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quatma.calculus import hess_quaternionic
from quatma.exceptions import ConfigError
from quatma.families import PlaneWaves, make_datum, manufactured_target, quaternionic_from_real
from quatma.grid import ScalarField


def test_plane_wave_hessian_matches_finite_differences():
    w = PlaneWaves.single(0.3, (1, 2), 0.4) + PlaneWaves.single(-0.2, (0, 1))
    x = np.array([0.13, 0.71])
    h = 1e-4
    H = w.hessian(x)
    for a in range(2):
        for b in range(2):
            ea, eb = np.eye(2)[a] * h, np.eye(2)[b] * h
            fd = (w.value(x + ea + eb) - w.value(x + ea - eb) - w.value(x - ea + eb) + w.value(x - ea - eb)) / (4 * h * h)
            assert H[a, b] == pytest.approx(fd, rel=1e-5, abs=1e-6)


@given(st.floats(0, 1), st.floats(0, 1))
def test_product_identity(x, y):
    a = PlaneWaves.single(1.5, (1, 0), 0.2)
    b = PlaneWaves.single(-0.5, (2, 1))
    c = (x, y)
    assert (a * b).value(c) == pytest.approx(a.value(c) * b.value(c), abs=1e-12)
    assert (2.0 * a).value(c) == pytest.approx(2.0 * a.value(c))


def test_quaternionic_from_real_matches_pointwise():
    rng = np.random.default_rng(0)
    S = rng.standard_normal((8, 8, 3))
    S = S + S.transpose(1, 0, 2)
    H = quaternionic_from_real(S, 2)
    for g in range(3):
        assert np.allclose(H[..., g], hess_quaternionic(S[..., g]).entries)


def test_zero_and_cosine_data():
    F, target = make_datum(1, 6, {"family": "zero"})
    assert target is None and np.all(F.values == 0)
    F, _ = make_datum(1, 8, {"family": "cosine", "scale": 0.5, "params": {"amplitude": 2.0}})
    assert F.values.max() == pytest.approx(1.0)


def test_bump_is_periodic_and_peaks_at_center():
    F, _ = make_datum(1, 8, {"family": "bump", "params": {"amplitude": 0.5}})
    assert F.values.max() == pytest.approx(0.5)
    assert F.values[4, 4, 4, 4] == F.values.max()


def test_manufactured_datum_vanishes_for_zero_amplitude():
    F, phi = make_datum(1, 6, {"family": "manufactured", "params": {"amplitude": 0.0}})
    assert np.allclose(F.values, 0.0)
    F, phi = make_datum(2, 4, {"family": "manufactured"})
    assert phi.coefficients[0] == pytest.approx(0.05)
    assert np.isfinite(F.values).all()


def test_manufactured_rejects_non_psh_amplitude():
    with pytest.raises(ConfigError):
        make_datum(1, 8, {"family": "manufactured", "params": {"amplitude": 0.05}})


@pytest.mark.parametrize(
    "description",
    [
        {"family": "nope"},
        {"family": "zero", "extra": 1},
        {"family": "zero", "params": {"amplitude": 1}},
        {"family": "cosine", "params": {"mode": [1, 0]}},
        {"family": "bump", "params": {"width": -1}},
        {"family": "manufactured", "params": {"mode": 1}},
    ],
)
def test_bad_descriptions_fail_closed(description):
    with pytest.raises(ConfigError):
        make_datum(1, 4, description)


def test_manufactured_target_shape():
    t = manufactured_target(2)
    assert t.d == 8
    f = t.field(2, 3)
    assert isinstance(f, ScalarField) and f.shape == (3,) * 8
