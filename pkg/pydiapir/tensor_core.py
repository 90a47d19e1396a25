# pyDiapir Module - 2x2 Tensor Algebra
# -*- coding: utf-8 -*-
"""
 Dense 2x2 tensor algebra shared by the constitutive kernels and assembly.

 A Tensor2 is a numpy array whose last two axes are 2x2, a Vec2 an array
 whose last axis has length 2. Every function broadcasts over leading axes,
 so a batch of per-element tensors is handled in one call. All arithmetic
 is float64.

 Functions
    identity()                 # 2x2 identity
    tensor(a11, a12, a21, a22) # Tensor2 from components
    vec(x, y)                  # Vec2 from components
    det(A)                     # a11*a22 - a12*a21
    inverse(A, eps)            # Closed-form inverse, SingularTensor if |det| <= eps
    sym(A), transpose(A)       # Symmetric part, transpose
    trace(A)                   # a11 + a22
    matmul(A, B)               # Matrix product
    frobenius_inner(A, B)      # A.B = tr(A B^T)
    is_finite(A)               # No NaN/Inf components
"""
import numpy as np

from pydiapir.aux import EPSILON_SINGULAR
from pydiapir.exceptions import SingularTensor

IDENTITY = np.eye(2)


def identity():
    return IDENTITY.copy()


def tensor(a11, a12, a21, a22):
    return np.array([[a11, a12], [a21, a22]], dtype=np.float64)


def vec(x, y):
    return np.array([x, y], dtype=np.float64)


def det(A):
    A = np.asarray(A, dtype=np.float64)
    return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]


def inverse(A, eps=EPSILON_SINGULAR):
    A = np.asarray(A, dtype=np.float64)
    d = det(A)
    if np.any(np.abs(d) <= eps):
        raise SingularTensor(f"singular tensor: |det| <= {eps:g}")
    adj = np.empty_like(A)
    adj[..., 0, 0] = A[..., 1, 1]
    adj[..., 0, 1] = -A[..., 0, 1]
    adj[..., 1, 0] = -A[..., 1, 0]
    adj[..., 1, 1] = A[..., 0, 0]
    return adj / d[..., None, None]


def transpose(A):
    return np.swapaxes(A, -1, -2)


def sym(A):
    return 0.5 * (A + transpose(A))


def trace(A):
    A = np.asarray(A)
    return A[..., 0, 0] + A[..., 1, 1]


def matmul(A, B):
    return np.matmul(A, B)


def frobenius_inner(A, B):
    return np.einsum('...ij,...ij->...', A, B)


def is_finite(A):
    return bool(np.all(np.isfinite(A)))
