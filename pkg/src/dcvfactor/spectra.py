"""Symmetric eigen-decomposition of Gram matrices.

Everything downstream (loadings, residual variances, cross-validation) is
built on :func:`gram_eigen`, which decomposes ``X.T @ X`` through the SVD of
``X`` rather than forming the Gram matrix.
"""
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, NonFiniteInput

# eigenvalues below this fraction of the largest are treated as exact zeros
ZERO_EIGEN_RTOL = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs of a p x p Gram matrix.

    Attributes
    ----------
    values : ndarray, shape (p,)
        Nonincreasing, nonnegative eigenvalues (squared data units).
    vectors : ndarray, shape (p, p)
        Orthonormal eigenvectors; column ``t`` pairs with ``values[t]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def p(self):
        return self.values.shape[0]

    def top(self, d):
        """Return the leading ``d`` eigenvectors as a p x d array."""
        return self.vectors[:, :d]


def as_matrix(X):
    """Validate and return ``X`` as a 2-D float64 array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise EmptyMatrix(f"expected a 2-D matrix, got shape {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyMatrix(f"matrix has an empty dimension: {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("matrix contains NaN or Inf entries")
    return X


def canonical_signs(vectors):
    """Flip columns so the entry of largest magnitude is positive.

    Ties in magnitude go to the lowest row index (``argmax`` semantics).
    """
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def gram_eigen(X):
    """Eigen-decompose ``X.T @ X`` via the singular values of ``X``.

    Parameters
    ----------
    X : array_like, shape (n, p)

    Returns
    -------
    EigenSystem
        Eigenvalues are squared singular values padded with zeros up to
        length ``p``; values below ``1e-12 * values[0]`` are set to exactly 0.
    """
    X = as_matrix(X)
    n, p = X.shape
    # full_matrices only when n < p, where the null-space completion is needed
    _, s, vt = np.linalg.svd(X, full_matrices=n < p)
    values = np.zeros(p)
    values[: s.shape[0]] = s * s
    if values[0] > 0:
        values[values < ZERO_EIGEN_RTOL * values[0]] = 0.0
    else:
        values[:] = 0.0
    vectors = canonical_signs(vt.T)
    return EigenSystem(values=values, vectors=np.ascontiguousarray(vectors))
