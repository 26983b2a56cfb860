import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quatma.exceptions import NotHyperHermitian
from quatma.hyperhermitian import (
    HyperHermitianMatrix,
    complex_embedding,
    is_positive_definite,
    leading_minors,
    min_eigenvalue,
    moore_det,
    moore_det_field,
    qconj_transpose,
    qmatmul,
    random_hyperhermitian,
    random_positive_definite,
    real_embedding,
    real_embedding_oracle,
    segment_consistency,
)

seeds = st.integers(0, 2**31 - 1)
dims = st.integers(1, 4)


@pytest.mark.parametrize("seed", range(200))
def test_real_embedding_oracle(seed):
    n = 1 + seed % 4
    A = random_hyperhermitian(n, seed)
    scale = max(1.0, A.norm()) ** (4 * n)
    assert abs(real_embedding_oracle(A) - moore_det(A) ** 4) <= 1e-8 * scale


def test_identity_and_diagonal():
    assert moore_det(HyperHermitianMatrix.identity(4)) == pytest.approx(1.0, abs=1e-14)
    assert moore_det(HyperHermitianMatrix.diag([2.0, -3.0, 0.5])) == pytest.approx(-3.0)


def test_two_by_two_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, c = rng.standard_normal(2)
        q = rng.standard_normal(4)
        e = np.zeros((2, 2, 4))
        e[0, 0, 0], e[1, 1, 0] = a, c
        e[0, 1], e[1, 0] = q, q * [1, -1, -1, -1]
        assert moore_det(e) == pytest.approx(a * c - q @ q, abs=1e-12)
        assert moore_det_field(e[..., None]) == pytest.approx(a * c - q @ q, abs=1e-12)


@given(seeds, dims, st.floats(-3, 3))
def test_homogeneity(seed, n, lam):
    A = random_hyperhermitian(n, seed)
    ref = lam**n * moore_det(A)
    assert abs(moore_det(A * lam) - ref) <= 1e-9 * max(1.0, abs(ref))


@given(seeds, dims)
def test_complex_hermitian_restriction(seed, n):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Z = Z + Z.conj().T
    e = np.zeros((n, n, 4))
    e[..., 0], e[..., 1] = Z.real, Z.imag
    ref = np.linalg.det(Z).real
    assert abs(moore_det(e) - ref) <= 1e-10 * max(1.0, abs(ref))


@settings(max_examples=50)
@given(seeds, dims)
def test_congruence(seed, n):
    # P(B* A B) = P(B* B) P(A)
    rng = np.random.default_rng(seed)
    A = random_hyperhermitian(n, seed).entries
    B = rng.standard_normal((n, n, 4))
    lhs = moore_det(qmatmul(qconj_transpose(B), qmatmul(A, B)))
    rhs = moore_det(qmatmul(qconj_transpose(B), B)) * moore_det(A)
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-10)


@settings(max_examples=50)
@given(seeds, dims)
def test_positive_definite_iff_leading_minors(seed, n):
    A = random_hyperhermitian(n, seed)
    assert is_positive_definite(A) == all(m > 0 for m in leading_minors(A))
    P = random_positive_definite(n, seed, shift=0.1)
    assert is_positive_definite(P) and min_eigenvalue(P) > 0
    assert moore_det(P) > 0


def test_real_embedding_is_left_multiplication():
    rng = np.random.default_rng(0)
    A = random_hyperhermitian(3, 5)
    v = rng.standard_normal((3, 4))
    Av = qmatmul(A.entries, v[:, None, :])[:, 0, :]
    assert np.allclose(real_embedding(A) @ v.ravel(), Av.ravel())


def test_complex_embedding_is_hermitian():
    chi = complex_embedding(random_hyperhermitian(3, 9))
    assert np.allclose(chi, chi.conj().T)


def test_rejects_non_hyperhermitian():
    e = np.zeros((2, 2, 4))
    e[0, 1, 2] = 1.0
    with pytest.raises(NotHyperHermitian):
        moore_det(e)
    e[0, 0, 1] = 1.0  # imaginary diagonal
    with pytest.raises(NotHyperHermitian):
        HyperHermitianMatrix(e)
    with pytest.raises(ValueError):
        moore_det(np.zeros((2, 3, 4)))


def test_matrix_is_read_only_and_symmetrized():
    A = random_hyperhermitian(2, 1)
    with pytest.raises(ValueError):
        A.entries[0, 0, 0] = 5.0
    assert np.array_equal(A.entries, qconj_transpose(A.entries))


def test_segment_consistency_small():
    P = random_positive_definite(3, 4, shift=0.5)
    assert segment_consistency(P, steps=16) < 1e-8
