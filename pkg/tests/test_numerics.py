import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adasense.errors import DimensionError, InvalidInputError
from adasense.numerics import (
    normalize_signs,
    orthonormal_complement_fill,
    penrose_residuals,
    pinv,
    principal_angles,
    sym_eig,
    top_right_singular,
)


def test_sym_eig_diagonal():
    pairs = sym_eig(np.diag([4.0, 1.0, 0.25]))
    np.testing.assert_allclose(pairs.values, [4.0, 1.0, 0.25])
    np.testing.assert_allclose(pairs.vectors, np.eye(3))


def test_sym_eig_identity_is_orthonormal():
    pairs = sym_eig(np.eye(3))
    np.testing.assert_allclose(pairs.values, 1.0)
    np.testing.assert_allclose(pairs.vectors.T @ pairs.vectors, np.eye(3), atol=1e-12)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_sym_eig_round_trip(seed):
    b = np.random.default_rng(seed).standard_normal((5, 5))
    a = b.T @ b
    pairs = sym_eig(a)
    rebuilt = pairs.vectors @ np.diag(pairs.values) @ pairs.vectors.T
    assert np.linalg.norm(rebuilt - a) <= 1e-8 * np.linalg.norm(a)
    assert np.all(np.diff(pairs.values) <= 0)


def test_sym_eig_errors():
    with pytest.raises(DimensionError):
        sym_eig(np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        sym_eig(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(InvalidInputError):
        sym_eig(np.array([[np.inf, 0.0], [0.0, 1.0]]))


def test_sign_convention():
    v = normalize_signs(np.array([[0.6], [-0.8]]), axis=0)
    np.testing.assert_allclose(v[:, 0], [-0.6, 0.8])
    rows = normalize_signs(np.array([[0.6, -0.8]]), axis=1)
    np.testing.assert_allclose(rows[0], [-0.6, 0.8])
    # ties resolve on the first index
    tie = normalize_signs(np.array([[-1.0], [1.0]]) / np.sqrt(2), axis=0)
    assert tie[0, 0] > 0


def test_top_right_singular_rank_one():
    a = np.array([[1.0, 0], [-1, 0], [2, 0], [-2, 0]])
    np.testing.assert_allclose(top_right_singular(a, 1), [[1.0, 0.0]])


def test_top_right_singular_identity():
    rows = top_right_singular(np.eye(3), 2)
    np.testing.assert_allclose(rows @ rows.T, np.eye(2), atol=1e-12)


def test_top_right_singular_matches_gram_eigvectors():
    a = np.random.default_rng(3).standard_normal((6, 4))
    rows = top_right_singular(a, 2)
    ref = sym_eig(a.T @ a).vectors[:, :2].T
    assert np.max(principal_angles(rows, ref)) < 1e-8


def test_top_right_singular_errors():
    with pytest.raises(DimensionError):
        top_right_singular(np.ones((2, 3)), 3)
    assert top_right_singular(np.ones((2, 3)), 0).shape == (0, 3)


def test_pinv_orthonormal_rows_is_transpose():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 2)))
    h = q.T
    np.testing.assert_allclose(pinv(h), h.T, atol=1e-12)


def test_pinv_zero_matrix():
    out = pinv(np.zeros((2, 4)))
    assert out.shape == (4, 2)
    assert not out.any()


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_pinv_penrose(seed):
    a = np.random.default_rng(seed).standard_normal((3, 7))
    p = pinv(a)
    np.testing.assert_allclose(a @ p, np.eye(3), atol=1e-9)
    assert max(penrose_residuals(a, p)) < 1e-9


def test_pinv_rank_deficient_matches_numpy():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 5))
    np.testing.assert_allclose(pinv(a), np.linalg.pinv(a), atol=1e-10)


def test_complement_fill_is_orthonormal():
    rows = np.array([[1.0, 1.0, 0.0]]) / np.sqrt(2)
    out = orthonormal_complement_fill(rows, 2, 3)
    np.testing.assert_allclose(out @ out.T, np.eye(3), atol=1e-12)
    with pytest.raises(DimensionError):
        orthonormal_complement_fill(rows, 3, 3)


def test_determinism():
    a = np.random.default_rng(9).standard_normal((8, 8))
    a = a @ a.T
    first, second = sym_eig(a), sym_eig(a.copy())
    assert np.array_equal(first.vectors, second.vectors)
    assert np.array_equal(first.values, second.values)
