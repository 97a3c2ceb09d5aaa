import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condtime import linalg as la
from conftest import SX, SZ, random_hermitian


def test_kron_identities():
    assert np.array_equal(la.tensor_product(np.eye(2), np.eye(2)), np.eye(4))
    assert np.array_equal(la.tensor_product(SZ, np.eye(2)), np.diag([1, 1, -1, -1]))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_kron_acts_factorwise(seed):
    rng = np.random.default_rng(seed)
    A, B = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)) for _ in range(2))
    u, v = (rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(2))
    lhs = la.tensor_product(A, B) @ np.kron(u, v)
    assert np.allclose(lhs, np.kron(A @ u, B @ v), atol=1e-13)


def test_eig_small_cases(rng):
    w, _ = la.hermitian_eig(SZ)
    assert np.array_equal(w, [-1.0, 1.0])
    w, _ = la.hermitian_eig(np.eye(5))
    assert np.allclose(w, 1.0)
    A = random_hermitian(rng, 6)
    w, v = la.hermitian_eig(A)
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs((v * w) @ v.conj().T - A)) <= 1e-10


def test_eig_rejects_non_hermitian():
    with pytest.raises(la.NotHermitianError):
        la.hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_matrix_exponential_closed_forms():
    assert np.allclose(la.matrix_exponential(np.zeros((3, 3))), np.eye(3))
    # exp(-i pi sigma_x / 2) = cos(pi/2) I - i sin(pi/2) sigma_x
    U = la.matrix_exponential(-0.5j * np.pi * SX)
    assert np.max(np.abs(U - (-1j) * SX)) < 1e-14
    a, b = 0.3, -1.7
    assert np.allclose(la.matrix_exponential(-1j * np.diag([a, b])), np.diag(np.exp([-1j * a, -1j * b])))


def test_exponential_general_matches_scipy_route(rng):
    # non anti-Hermitian input goes through scipy; check against a power series
    A = 0.1 * (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    ref = np.eye(4, dtype=complex)
    term = np.eye(4, dtype=complex)
    for k in range(1, 30):
        term = term @ A / k
        ref = ref + term
    assert np.max(np.abs(la.matrix_exponential(A) - ref)) < 1e-14


def test_expm_hermitian_is_unitary(rng):
    H = random_hermitian(rng, 5)
    U = la.expm_hermitian(H, 0.7)
    assert np.allclose(U.conj().T @ U, np.eye(5), atol=1e-13)
    assert np.allclose(U, la.matrix_exponential(-0.7j * H), atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_basic_ops(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    assert np.array_equal(la.adjoint(la.adjoint(A)), A)
    vv = la.inner(v, v)
    assert vv.imag == pytest.approx(0.0, abs=1e-12) and vv.real >= 0
    assert la.vec_norm(la.matvec(A, v)) <= la.frobenius_norm(A) * la.vec_norm(v) * (1 + 1e-12)


def test_shape_errors():
    with pytest.raises(la.DimensionError):
        la.matmul(np.eye(2), np.eye(3))
    with pytest.raises(la.DimensionError):
        la.matvec(np.eye(2), np.ones(3))
    with pytest.raises(la.DimensionError):
        la.as_operator(np.ones(3))
    with pytest.raises(la.DimensionError):
        la.as_vector(np.eye(2))
