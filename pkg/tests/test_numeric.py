"""Stable reductions: hand values, shift invariance, error contracts."""

import numpy as np
import pytest

from energyfuse.numeric import (
    ContractError,
    as_matrix,
    lse,
    lse_cols,
    matmul,
    sigmoid,
    softmax,
    softmax_cols,
)

LN2 = 0.6931471805599453
LSE_2_0 = 2.1269280110429727  # log(e^2 + 1), 40-digit evaluation rounded


def test_lse_equal_entries():
    assert abs(lse([0.0, 0.0]) - LN2) < 1e-15


def test_lse_huge_entries_do_not_overflow():
    assert abs(lse([1000.0, 1000.0]) - (1000.0 + LN2)) < 1e-12


def test_lse_hand_value():
    assert abs(lse([2.0, 0.0]) - LSE_2_0) < 1e-15


def test_lse_bounds_max():
    rng = np.random.default_rng(7)
    for _ in range(200):
        x = rng.normal(size=rng.integers(1, 12)) * 10
        assert lse(x) >= x.max()


def test_lse_shift_invariance():
    rng = np.random.default_rng(8)
    for _ in range(200):
        x = rng.normal(size=6) * 20
        c = float(rng.normal() * 50)
        assert abs(lse(x + c) - lse(x) - c) < 1e-12 * max(1.0, abs(c))


def test_lse_empty_rejected():
    with pytest.raises(ContractError):
        lse([])


def test_softmax_symmetry():
    np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-15)


def test_softmax_hand_value():
    p = softmax([1.0, 0.0])
    assert abs(p[0] - 0.7310585786300049) < 1e-15
    assert abs(p[1] - 0.2689414213699951) < 1e-15


def test_softmax_sums_to_one_and_positive():
    rng = np.random.default_rng(9)
    for _ in range(200):
        x = rng.normal(size=rng.integers(2, 16)) * 30
        p = softmax(x)
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(p > 0)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(10)
    for _ in range(100):
        x = rng.normal(size=5) * 10
        c = float(rng.normal() * 40)
        np.testing.assert_allclose(softmax(x + c), softmax(x), atol=1e-12)


def test_softmax_empty_rejected():
    with pytest.raises(ContractError):
        softmax([])


def test_matmul_identity():
    x = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(matmul(np.eye(2), x), x)


def test_matmul_zero_annihilates():
    x = np.ones((3, 2))
    np.testing.assert_array_equal(matmul(np.zeros((2, 3)), x), np.zeros((2, 2)))


def test_matmul_hand_value():
    out = matmul([[1.0, 2.0], [3.0, 4.0]], [[1.0], [1.0]])
    np.testing.assert_array_equal(out, [[3.0], [7.0]])


def test_matmul_shape_mismatch_names_shapes():
    with pytest.raises(ContractError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(np.ones((2, 3)), np.ones((2, 2)))


def test_column_reductions_match_vector_forms():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(5, 9)) * 8
    cols_lse = lse_cols(x)
    cols_sm = softmax_cols(x)
    for j in range(x.shape[1]):
        assert abs(cols_lse[0, j] - lse(x[:, j])) < 1e-12
        np.testing.assert_allclose(cols_sm[:, j], softmax(x[:, j]), atol=1e-12)


def test_as_matrix_promotes_vectors_to_columns():
    assert as_matrix([1.0, 2.0]).shape == (2, 1)
    with pytest.raises(ContractError):
        as_matrix(np.zeros((2, 2, 2)))


def test_sigmoid_tails_are_stable():
    out = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert out[0] == 0.0
    assert out[1] == 0.5
    assert out[2] == 1.0
    assert np.all(np.isfinite(out))


def test_sigmoid_matches_definition_in_active_range():
    x = np.linspace(-20, 20, 101)
    np.testing.assert_allclose(sigmoid(x), 1.0 / (1.0 + np.exp(-x)), rtol=1e-14)
