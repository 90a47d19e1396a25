# Test 2x2 tensor algebra
import numpy as np
import pytest

from pydiapir import tensor_core as tc
from pydiapir.exceptions import SingularTensor


def test_constructors():
    A = tc.tensor(1, 2, 3, 4)
    assert A.shape == (2, 2)
    assert A[1, 0] == 3
    assert np.array_equal(tc.vec(1.5, -2), np.array([1.5, -2.0]))
    I = tc.identity()
    I[0, 0] = 7.0
    assert tc.IDENTITY[0, 0] == 1.0


def test_det_trace_inverse():
    A = tc.tensor(2.0, 1.0, 0.5, 3.0)
    assert tc.det(A) == pytest.approx(5.5)
    assert tc.trace(A) == pytest.approx(5.0)
    np.testing.assert_allclose(tc.inverse(A) @ A, np.eye(2), atol=1e-15)


def test_inverse_singular():
    with pytest.raises(SingularTensor):
        tc.inverse(tc.tensor(1.0, 2.0, 2.0, 4.0))
    with pytest.raises(SingularTensor):
        tc.inverse(np.zeros((2, 2)))


def test_batch_broadcasting(rng):
    A = rng.standard_normal((7, 3, 2, 2)) + 3.0 * np.eye(2)
    np.testing.assert_allclose(tc.det(A), np.linalg.det(A), rtol=1e-12)
    np.testing.assert_allclose(tc.inverse(A), np.linalg.inv(A), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(tc.trace(A), np.trace(A, axis1=-2, axis2=-1))
    np.testing.assert_allclose(tc.matmul(A, tc.transpose(A)), A @ np.swapaxes(A, -1, -2))


def test_sym_and_inner(rng):
    A = rng.standard_normal((2, 2))
    B = rng.standard_normal((2, 2))
    S = tc.sym(A)
    assert np.array_equal(S, S.T)
    assert tc.frobenius_inner(A, B) == pytest.approx(np.trace(A @ B.T))
    assert tc.frobenius_inner(S, A - A.T) == pytest.approx(0.0, abs=1e-15)


def test_is_finite():
    assert tc.is_finite(tc.identity())
    assert not tc.is_finite(tc.tensor(1.0, np.nan, 0.0, 1.0))
    assert not tc.is_finite(tc.tensor(np.inf, 0.0, 0.0, 1.0))
