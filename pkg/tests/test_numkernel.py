import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from relspec.numkernel import (GradedSpace, InnerProduct, StructuralError, adjoint_wrt, hermitian_funcalc,
                               null_space, opnorm, orth_projector, orthonormal_basis, pseudoinverse)


def rand_herm(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (A + A.conj().T)


def rand_gram(rng, n):
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return B @ B.conj().T + n * np.eye(n)


def test_funcalc_fixed_points_of_sqrt():
    assert np.allclose(hermitian_funcalc(np.diag([0.0, 1.0]), np.sqrt), np.diag([0, 1]), atol=1e-14)


def test_funcalc_scalar_transform():
    F = hermitian_funcalc(np.diag([3.0]), lambda x: x / np.sqrt(1 + x**2))
    assert abs(F[0, 0] - 3 / np.sqrt(10)) < 1e-15


def test_funcalc_exp_against_pade():
    A = rand_herm(np.random.default_rng(1), 4)
    assert np.max(np.abs(hermitian_funcalc(A, np.exp) - sla.expm(A))) < 1e-10


def test_funcalc_refuses_non_self_adjoint():
    with pytest.raises(StructuralError):
        hermitian_funcalc(np.array([[0.0, 1.0], [0.0, 0.0]]), np.exp)


def test_funcalc_weighted_inner():
    rng = np.random.default_rng(2)
    ip = InnerProduct(rand_gram(rng, 5))
    # self-adjoint w.r.t. G: A = G^{-1} H
    A = np.linalg.solve(ip.gram, rand_herm(rng, 5))
    S = hermitian_funcalc(A, lambda x: x**2, ip)
    assert np.linalg.norm(S - A @ A) < 1e-10 * np.linalg.norm(A @ A)


def test_adjoint_euclidean_is_conjugate_transpose():
    M = np.array([[1, 2j], [3, 4]])
    e = InnerProduct.euclidean(2)
    assert np.allclose(adjoint_wrt(M, e, e), M.conj().T)


def test_adjoint_weighted_pairing_on_basis():
    G = InnerProduct(np.diag([1.0, 2.0]))
    M = np.array([[0.0, 1.0], [0.0, 0.0]])
    Ms = adjoint_wrt(M, G, G)
    # brute force over basis vectors
    E = np.eye(2)
    for i in range(2):
        for j in range(2):
            assert abs(G.dot(M @ E[i], E[j]) - G.dot(E[i], Ms @ E[j])) < 1e-15
    assert np.allclose(Ms, [[0, 0], [0.5, 0]])


def test_adjoint_of_unitary_is_inverse():
    th = 0.7
    U = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    e = InnerProduct.euclidean(2)
    assert np.allclose(adjoint_wrt(U, e, e), np.linalg.inv(U))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=7), st.integers(min_value=0, max_value=10**6))
def test_adjoint_pairing_identity(n, seed):
    rng = np.random.default_rng(seed)
    d, c = InnerProduct(rand_gram(rng, n)), InnerProduct(rand_gram(rng, n + 1))
    M = rng.standard_normal((n + 1, n)) + 1j * rng.standard_normal((n + 1, n))
    Ms = adjoint_wrt(M, d, c)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
    lhs, rhs = c.dot(M @ x, y), d.dot(x, Ms @ y)
    assert abs(lhs - rhs) <= 1e-12 * opnorm(M, d, c) * d.norm(x) * c.norm(y) * 10


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_funcalc_composition(seed):
    A = rand_herm(np.random.default_rng(seed), 8)
    f = lambda x: x**2 - 2 * x + 1
    g = lambda x: 3 * x**3 + x
    once = hermitian_funcalc(A, lambda x: f(g(x)))
    twice = hermitian_funcalc(hermitian_funcalc(A, g), f)
    assert np.linalg.norm(once - twice) <= 1e-10 * max(np.linalg.norm(once), 1.0)


def test_pseudoinverse_cases():
    assert np.allclose(pseudoinverse(np.diag([0.0, 2.0])), np.diag([0, 0.5]))
    A = rand_herm(np.random.default_rng(3), 5) + 10 * np.eye(5)
    assert np.linalg.norm(A @ pseudoinverse(A) - np.eye(5)) <= 1e-10
    v = np.array([1.0, 1.0]) / np.sqrt(2)
    P = np.outer(v, v)
    assert np.allclose(pseudoinverse(P), P)


def test_projector_cases():
    assert np.allclose(orth_projector(np.zeros((3, 0))), np.zeros((3, 3)))
    assert np.allclose(orth_projector(np.eye(3)), np.eye(3))
    v = np.array([1.0, 1.0]) / np.sqrt(2)
    assert np.allclose(orth_projector(v), [[0.5, 0.5], [0.5, 0.5]])


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=3, max_value=8), st.integers(min_value=0, max_value=10**6))
def test_projector_laws(n, seed):
    rng = np.random.default_rng(seed)
    ip = InnerProduct(rand_gram(rng, n))
    X = rng.standard_normal((n, n // 2)) + 1j * rng.standard_normal((n, n // 2))
    P = orth_projector(X, ip)
    assert np.linalg.norm(P @ P - P) <= 1e-12 * n * 10
    assert np.linalg.norm(adjoint_wrt(P, ip, ip) - P) <= 1e-12 * n * 10


def test_orthonormal_basis_is_deterministic_and_orthonormal():
    rng = np.random.default_rng(4)
    ip = InnerProduct(rand_gram(rng, 6))
    X = rng.standard_normal((6, 3))
    Q1, Q2 = orthonormal_basis(X, ip), orthonormal_basis(X, ip)
    assert np.array_equal(Q1, Q2)
    assert np.allclose(Q1.conj().T @ ip.gram @ Q1, np.eye(3), atol=1e-12)


def test_null_space_weighted():
    M = np.array([[1.0, -1.0, 0.0]])
    ip = InnerProduct(np.diag([1.0, 2.0, 3.0]))
    K = null_space(M, ip)
    assert K.shape == (3, 2)
    assert np.allclose(M @ K, 0, atol=1e-14)
    assert np.allclose(K.conj().T @ ip.gram @ K, np.eye(2), atol=1e-12)


def test_inner_product_validation():
    with pytest.raises(StructuralError):
        InnerProduct(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(StructuralError):
        InnerProduct(np.diag([1.0, -1.0]))
    with pytest.raises(StructuralError):
        GradedSpace(InnerProduct.euclidean(2), np.diag([1.0, 2.0]))
