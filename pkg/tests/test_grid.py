import json

import numpy as np
import pytest

from quatma.calculus import hess_field, hess_quaternionic
from quatma.exceptions import GridTooCoarse
from quatma.grid import (
    FUETER_WEIGHTS,
    ScalarField,
    hessian_at,
    mixed_diff,
    quaternionic_hessian_field,
)
from quatma.quaternion import UNITS, qconj, qmul


def test_field_basics():
    f = ScalarField.from_function(1, 4, lambda X: X[0] + 10 * X[3])
    assert f.shape == (4,) * 4
    assert f[1, 0, 0, 0] == pytest.approx(0.25)
    assert f[5, 0, 0, -1] == pytest.approx(0.25 + 10 * 0.75)  # periodic indexing
    assert f.h == 0.25
    with pytest.raises(ValueError):
        ScalarField(1, 4, np.zeros((4, 4, 4)))
    with pytest.raises(GridTooCoarse):
        hess_field(ScalarField(1, 2), (0, 0, 0, 0))


def test_binary_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    f = ScalarField(1, 5, rng.standard_normal((5,) * 4))
    bin_path, hdr_path = f.save(tmp_path / "phi")
    header = json.loads(hdr_path.read_text())
    assert header == {
        "n": 1, "N": 5, "dtype": "<f8", "ordering": "row-major", "axes": ["t1", "x1", "y1", "z1"],
    }
    assert bin_path.stat().st_size == 8 * 5**4
    g = ScalarField.load(tmp_path / "phi")
    assert np.array_equal(f.values, g.values)
    # row-major: the last axis (z1) varies fastest
    flat = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    assert flat[1] == f.values[0, 0, 0, 1]


def test_axis_names_for_n2():
    assert ScalarField(2, 4).header()["axes"] == ["t1", "x1", "y1", "z1", "t2", "x2", "y2", "z2"]


def test_fueter_weights():
    for c in range(4):
        for d in range(4):
            assert np.allclose(FUETER_WEIGHTS[:, c, d], qmul(UNITS[c], qconj(UNITS[d])))


def test_hessian_exact_on_quadratics():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((4, 4))
    S = B + B.T
    f = ScalarField.from_function(1, 8, lambda X: 0.5 * sum(S[a, b] * X[a] * X[b] for a in range(4) for b in range(4)))
    assert np.allclose(hessian_at(f, (3, 3, 3, 3)), S, atol=1e-10)
    # Hess_H of a quadratic is its SU(2) average, independent of the point
    H = hess_field(f, (3, 4, 3, 2)).entries
    assert np.allclose(H, hess_quaternionic(S).entries, atol=1e-10)


def test_hessian_second_order():
    def err(N):
        f = ScalarField.from_function(1, N, lambda X: np.sin(2 * np.pi * (X[0] + 2 * X[1])) * np.cos(2 * np.pi * X[2]))
        p = (N // 8, N // 4, N // 8, 0)
        x = np.array(p) / N
        k = 2 * np.pi * np.array([1.0, 2.0, 0.0])
        s, c = np.sin(k[0] * x[0] + k[1] * x[1]), np.cos(k[0] * x[0] + k[1] * x[1])
        cz, sz = np.cos(2 * np.pi * x[2]), np.sin(2 * np.pi * x[2])
        w = 2 * np.pi
        exact = np.zeros((4, 4))
        for a in range(2):
            for b in range(2):
                exact[a, b] = -k[a] * k[b] * s * cz
            exact[a, 2] = exact[2, a] = -k[a] * w * c * sz
        exact[2, 2] = -w * w * s * cz
        return np.max(np.abs(hessian_at(f, p) - exact))

    order = np.log2(err(16) / err(32))
    assert order >= 1.9


@pytest.mark.parametrize("n,N", [(1, 5), (2, 4)])
def test_field_hessian_matches_pointwise(n, N):
    rng = np.random.default_rng(n)
    f = ScalarField(n, N, rng.standard_normal((N,) * (4 * n)))
    H = quaternionic_hessian_field(f.values, n, f.h)
    for _ in range(5):
        p = tuple(rng.integers(0, N, size=4 * n))
        assert np.allclose(H[(...,) + p], hess_field(f, p).entries, atol=1e-9)


def test_mixed_diff_is_cross_stencil():
    rng = np.random.default_rng(2)
    v = rng.standard_normal((6, 6))
    h = 0.1
    ref = (np.roll(v, (-1, -1), (0, 1)) - np.roll(v, (-1, 1), (0, 1))
           - np.roll(v, (1, -1), (0, 1)) + np.roll(v, (1, 1), (0, 1))) / (4 * h * h)
    assert np.allclose(mixed_diff(v, 0, 1, h), ref)
