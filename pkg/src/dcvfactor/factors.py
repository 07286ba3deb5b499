"""Principal-component loadings, rescaled loadings, leverages and scores."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, RankDeficient
from .spectra import EigenSystem, as_matrix, gram_eigen

# relative tolerance on squared singular values of a loading matrix
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class LoadingEstimate:
    """A p x d loading matrix and where it came from.

    ``rescaled`` marks loadings multiplied through by the sample Gram matrix;
    ``excluded_fold`` is set when they were estimated with a fold held out.
    """

    loadings: np.ndarray
    rescaled: bool = False
    excluded_fold: Optional[int] = None

    @property
    def working_d(self):
        return self.loadings.shape[1]

    @property
    def p(self):
        return self.loadings.shape[0]


@dataclass(frozen=True)
class FactorScores:
    scores: np.ndarray

    @property
    def working_d(self):
        return self.scores.shape[1]


def estimate_loadings(X, d, eigen: Optional[EigenSystem] = None, excluded_fold=None):
    """Principal-component loadings ``sqrt(p) * (phi_1, ..., phi_d)``.

    Parameters
    ----------
    X : array_like, shape (n, p)
    d : int
        Working number of factors, ``0 <= d <= p``.
    eigen : EigenSystem, optional
        Precomputed decomposition of ``X.T @ X``; skips the SVD.

    Returns
    -------
    LoadingEstimate
        Satisfies ``L.T @ L / p == I_d``.
    """
    X = as_matrix(X)
    p = X.shape[1]
    if d < 0 or d > p:
        raise DimensionError(f"working d={d} must lie in [0, p={p}]")
    if eigen is None:
        eigen = gram_eigen(X)
    elif eigen.p != p:
        raise DimensionError(f"eigen system has p={eigen.p}, matrix has p={p}")
    L = np.sqrt(p) * eigen.top(d)
    return LoadingEstimate(np.array(L), rescaled=False, excluded_fold=excluded_fold)


def common_factors(X, L_tilde):
    """Factor estimates ``X @ L / p`` paired with unrescaled loadings."""
    X = as_matrix(X)
    L = L_tilde.loadings
    if X.shape[1] != L.shape[0]:
        raise DimensionError(f"X has {X.shape[1]} columns, loadings have {L.shape[0]} rows")
    return FactorScores(X @ L / L.shape[0])


def rescale_loadings(X_minus, L_tilde):
    """Multiply loadings through by the sample Gram matrix of ``X_minus``.

    Returns ``(X_minus.T @ X_minus) @ L / n_minus`` flagged as rescaled. Column
    ``t`` equals ``values[t] / n_minus * sqrt(p) * phi_t``.
    """
    if L_tilde.rescaled:
        raise ValueError("loadings are already rescaled")
    X_minus = as_matrix(X_minus)
    L = L_tilde.loadings
    if X_minus.shape[1] != L.shape[0]:
        raise DimensionError(
            f"X_minus has {X_minus.shape[1]} columns, loadings have {L.shape[0]} rows")
    L_hat = X_minus.T @ (X_minus @ L) / X_minus.shape[0]
    return LoadingEstimate(L_hat, rescaled=True, excluded_fold=L_tilde.excluded_fold)


def _thin_basis(L):
    """Thin SVD of a loading matrix, raising when it is numerically rank deficient."""
    u, s, wt = np.linalg.svd(L, full_matrices=False)
    s2 = s * s
    if s2.size and (s2[0] == 0 or s2[-1] <= RANK_RTOL * s2[0]):
        rank = int(np.sum(s2 > RANK_RTOL * s2[0])) if s2[0] > 0 else 0
        raise RankDeficient(f"loading matrix has effective rank {rank} < d={L.shape[1]}")
    return u, s, wt


def projection_leverages(L_hat):
    """Diagonal of the projector onto the column span of the loadings."""
    L = L_hat.loadings if isinstance(L_hat, LoadingEstimate) else np.asarray(L_hat, float)
    if L.shape[1] == 0:
        return np.zeros(L.shape[0])
    u, _, _ = _thin_basis(L)
    return np.einsum("st,st->s", u, u)


def ols_factor_scores(L_hat, X):
    """Least-squares factor scores for each row of ``X`` given loadings.

    Row ``i`` of the result minimises ``||x_i - L f||^2``.
    """
    L = L_hat.loadings if isinstance(L_hat, LoadingEstimate) else np.asarray(L_hat, float)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != L.shape[0]:
        raise DimensionError(f"X has {X.shape[1]} columns, loadings have {L.shape[0]} rows")
    d = L.shape[1]
    if d == 0:
        return FactorScores(np.zeros((X.shape[0], 0)))
    u, s, wt = _thin_basis(L)
    # f = W S^-1 U^T x, row-wise
    scores = (X @ u) / s @ wt
    return FactorScores(scores)
