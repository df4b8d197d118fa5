import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from l1lowrank.errors import InvalidInputError, ShapeError
from l1lowrank.linalg import (
    FROBENIUS,
    entrywise_norm,
    pinv,
    rank_constrained_solve,
    split_rank_k,
    svd,
    svd_truncate,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def small_matrix(max_side=6):
    shapes = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite))


def test_svd_truncate_diag():
    out = svd_truncate(np.diag([3.0, 2.0, 1.0]), 2)
    np.testing.assert_allclose(out, np.diag([3.0, 2.0, 0.0]), atol=1e-12)


def test_svd_truncate_identity_full_rank():
    np.testing.assert_allclose(svd_truncate(np.eye(3), 3), np.eye(3), atol=1e-12)


def test_svd_truncate_beats_random_rank2_candidates():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 4))
    best = np.linalg.norm(A - svd_truncate(A, 2))
    for _ in range(1000):
        cand = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 4))
        assert best <= np.linalg.norm(A - cand) + 1e-12


def test_svd_truncate_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        svd_truncate(np.array([[np.nan, 1.0]]), 1)
    with pytest.raises(InvalidInputError):
        svd_truncate(np.eye(2), 0)


def test_svd_result_invariants():
    A = np.random.default_rng(1).standard_normal((7, 4))
    res = svd(A)
    U, s, V = res.left_vectors, res.singular_values, res.right_vectors
    np.testing.assert_allclose(U.T @ U, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(V.T @ V, np.eye(4), atol=1e-12)
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
    assert np.abs(res.reconstruct() - A).max() <= 1e-12 * s[0]


def test_pinv_examples():
    np.testing.assert_allclose(pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    np.testing.assert_allclose(pinv(np.array([[1.0, 1.0], [0.0, 1.0]])), [[1.0, -1.0], [0.0, 1.0]], atol=1e-12)
    np.testing.assert_array_equal(pinv(np.zeros((2, 3))), np.zeros((3, 2)))


def test_pinv_penrose_identities():
    A = np.random.default_rng(2).standard_normal((6, 3))
    P = pinv(A)
    np.testing.assert_allclose(A @ P @ A, A, atol=1e-9)
    np.testing.assert_allclose(P @ A @ P, P, atol=1e-9)
    np.testing.assert_allclose((A @ P).T, A @ P, atol=1e-9)
    np.testing.assert_allclose((P @ A).T, P @ A, atol=1e-9)


def test_pinv_twice_reconstructs():
    A = np.random.default_rng(3).standard_normal((5, 5))
    assert np.linalg.norm(pinv(pinv(A)) - A) <= 1e-8 * np.linalg.norm(A)


def test_rank_constrained_identity_collapses_to_svd():
    A = np.random.default_rng(4).standard_normal((5, 5))
    X = rank_constrained_solve(A, np.eye(5), np.eye(5), 2)
    np.testing.assert_allclose(X, svd_truncate(A, 2), atol=1e-10)


def test_rank_constrained_exact_representation():
    rng = np.random.default_rng(5)
    B, C = rng.standard_normal((8, 4)), rng.standard_normal((3, 7))
    W = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 3))
    A = B @ W @ C
    X = rank_constrained_solve(A, B, C, 2)
    assert np.linalg.norm(A - B @ X @ C) <= 1e-9 * np.linalg.norm(A)
    assert np.linalg.matrix_rank(X) <= 2


def test_rank_constrained_beats_random_candidates():
    rng = np.random.default_rng(6)
    A, B, C = rng.standard_normal((6, 6)), rng.standard_normal((6, 3)), rng.standard_normal((3, 6))
    X = rank_constrained_solve(A, B, C, 2)
    best = np.linalg.norm(A - B @ X @ C)
    for _ in range(1000):
        cand = rng.standard_normal((3, 2)) @ rng.standard_normal((2, 3))
        assert best <= np.linalg.norm(A - B @ cand @ C) + 1e-12


def test_rank_constrained_full_k_matches_untruncated_formula():
    rng = np.random.default_rng(7)
    A, B, C = rng.standard_normal((6, 5)), rng.standard_normal((6, 3)), rng.standard_normal((4, 5))
    X = rank_constrained_solve(A, B, C, 3)
    Ub = svd(B).left_vectors
    Vc = svd(C).right_vectors
    X0 = pinv(B) @ (Ub @ Ub.T @ A @ Vc @ Vc.T) @ pinv(C)
    assert np.isclose(np.linalg.norm(A - B @ X @ C), np.linalg.norm(A - B @ X0 @ C), rtol=1e-10)


def test_rank_constrained_shape_errors():
    with pytest.raises(ShapeError):
        rank_constrained_solve(np.zeros((3, 3)), np.zeros((4, 2)), np.zeros((2, 3)), 1)
    with pytest.raises(InvalidInputError):
        rank_constrained_solve(np.zeros((3, 3)), np.eye(3), np.eye(3), 4)


def test_split_rank_k_reconstructs():
    X = np.random.default_rng(8).standard_normal((5, 2)) @ np.random.default_rng(9).standard_normal((2, 4))
    left, right = split_rank_k(X, 2)
    np.testing.assert_allclose(left @ right, X, atol=1e-12)
    np.testing.assert_allclose(left.T @ left, np.eye(2), atol=1e-12)
    left, right = split_rank_k(X, 4)
    assert left.shape == (5, 4) and right.shape == (4, 4)


def test_entrywise_norm_examples():
    assert entrywise_norm(np.array([[1.0, -2.0], [3.0, 0.0]]), 1) == 6.0
    assert np.isclose(entrywise_norm(np.array([[1.0, 1.0]]), 1.5), 2 ** (1 / 1.5))
    assert np.isclose(entrywise_norm(np.diag([3.0, 4.0]), FROBENIUS), 5.0)


@settings(max_examples=60, deadline=None)
@given(small_matrix())
def test_norm_chain(A):
    l1 = entrywise_norm(A, 1)
    fro = entrywise_norm(A, FROBENIUS)
    assert l1 + 1e-9 >= fro >= l1 / np.sqrt(A.size) - 1e-9


@settings(max_examples=40, deadline=None)
@given(small_matrix())
def test_truncation_residual_non_increasing(A):
    res = [np.linalg.norm(A - svd_truncate(A, k)) for k in range(1, min(A.shape) + 1)]
    assert all(b <= a + 1e-9 for a, b in zip(res, res[1:]))
    assert all(np.linalg.matrix_rank(svd_truncate(A, k), tol=1e-8) <= k for k in range(1, min(A.shape) + 1))
