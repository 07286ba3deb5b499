"""Double cross-validation (DCV) for the number of factors.

Rows are split into K folds. For each fold the loadings are estimated on the
remaining rows, rescaled by their Gram matrix, and every held-out entry
``x_is`` is predicted from the other entries of its row. The leave-one-variable
out prediction error has a closed form in terms of the least-squares residual
and the leverage of variable ``s``, so no refitting over variables is needed.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import BadFoldCount, DimensionError, LeverageSaturated, NumericalError
from .factors import (
    RANK_RTOL,
    LoadingEstimate,
    estimate_loadings,
    ols_factor_scores,
    projection_leverages,
    rescale_loadings,
)
from .spectra import as_matrix, gram_eigen

# leverages above 1 - LEVERAGE_MARGIN make the held-out prediction undefined
LEVERAGE_MARGIN = 1e-8

TRANSPOSE_POLICIES = ("never", "auto", "always")


@dataclass(frozen=True)
class FoldPlan:
    folds: List[np.ndarray]
    seed: int

    @property
    def K(self):
        return len(self.folds)

    @property
    def n(self):
        return sum(len(f) for f in self.folds)

    def sizes(self):
        return [len(f) for f in self.folds]


@dataclass
class DcvCurve:
    d_min: int
    d_max: int
    values: np.ndarray
    selected: int
    fold_plan: FoldPlan
    transposed: bool = False
    # per-fold effective rank cap applied when d exceeded the rank of X_{-M_k}
    rank_capped: List[tuple] = field(default_factory=list)

    @property
    def ds(self):
        return np.arange(self.d_min, self.d_max + 1)

    def as_dict(self):
        return {int(d): float(v) for d, v in zip(self.ds, self.values)}


def make_folds(n, K, seed):
    """Shuffle ``range(n)`` with ``seed`` and cut it into K balanced folds.

    Each fold is returned sorted; fold sizes differ by at most one.
    """
    n, K = int(n), int(K)
    if K < 2 or K > n:
        raise BadFoldCount(f"fold count K={K} must satisfy 2 <= K <= n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = [np.sort(chunk) for chunk in np.array_split(perm, K)]
    return FoldPlan(folds=folds, seed=int(seed))


def _press_rows(X_rows, L_hat, w):
    if np.any(w > 1.0 - LEVERAGE_MARGIN):
        s = int(np.argmax(w))
        raise LeverageSaturated(f"leverage of variable {s} is {w[s]:.12g}")
    d = L_hat.loadings.shape[1]
    if d == 0:
        resid = X_rows
    else:
        F = ols_factor_scores(L_hat, X_rows).scores
        resid = X_rows - F @ L_hat.loadings.T
    return np.mean((resid / (1.0 - w)) ** 2, axis=1)


def press_error(x_i, L_hat, w):
    """Average leave-one-variable-out squared prediction error of one row.

    ``V = mean_s (x_is - f_i' l_s)^2 / (1 - w_s)^2`` where ``f_i`` is the
    least-squares score of the full row and ``w`` the projection leverages
    of ``L_hat``.
    """
    x_i = np.asarray(x_i, dtype=np.float64).reshape(1, -1)
    w = np.asarray(w, dtype=np.float64)
    if x_i.shape[1] != L_hat.p or w.shape != (L_hat.p,):
        raise DimensionError("row, loadings and leverages disagree on p")
    return float(_press_rows(x_i, L_hat, w)[0])


def select_d(curve):
    """Smallest ``d`` attaining the minimum of the curve."""
    values = np.asarray(curve.values)
    return int(curve.d_min + np.flatnonzero(values == values.min())[0])


def _effective_rank(L_hat_max):
    norms = np.sum(L_hat_max * L_hat_max, axis=0)
    if norms.size == 0 or norms[0] <= 0:
        return 0
    return int(np.sum(norms > RANK_RTOL * norms.max()))


def fold_press(X, fold, d_min, d_max, k=None):
    """PRESS values ``V_i^{k,d}`` for the rows of one fold.

    Returns an array of shape ``(len(fold), d_max - d_min + 1)`` and the
    effective rank of the rescaled loadings. Candidate ``d`` beyond that rank
    reuse the rank-capped fit: zero loading columns add nothing to the
    projection, which is what the pseudo-inverse formulation gives.
    """
    mask = np.ones(X.shape[0], dtype=bool)
    mask[fold] = False
    X_minus = X[mask]
    X_k = X[fold]
    eig = gram_eigen(X_minus)
    L_tilde = estimate_loadings(X_minus, d_max, eigen=eig, excluded_fold=k)
    L_hat_max = rescale_loadings(X_minus, L_tilde).loadings
    r_eff = _effective_rank(L_hat_max)
    out = np.empty((len(fold), d_max - d_min + 1))
    cache = {}
    for j, d in enumerate(range(d_min, d_max + 1)):
        d_eff = min(d, r_eff)
        if d_eff not in cache:
            L_hat = LoadingEstimate(L_hat_max[:, :d_eff], rescaled=True, excluded_fold=k)
            try:
                w = projection_leverages(L_hat)
                cache[d_eff] = _press_rows(X_k, L_hat, w)
            except NumericalError as exc:
                raise type(exc)(str(exc), fold=k, d=d) from exc
        out[:, j] = cache[d_eff]
    return out, r_eff


def dcv_curve(X, K=10, d_min=0, d_max=8, seed=0, transpose_policy="auto"):
    """Evaluate ``DCV(d)`` for ``d_min <= d <= d_max`` and select ``d``.

    Parameters
    ----------
    X : array_like, shape (n, p)
    K : int
        Number of row folds; ``K == n`` is leave-one-out.
    d_min, d_max : int
        Candidate range, requires ``d_max < p``.
    seed : int
        Seed of the fold shuffle.
    transpose_policy : {"never", "auto", "always"}
        ``auto`` transposes when ``n < p``; folds then split the original
        columns.

    Returns
    -------
    DcvCurve
    """
    if transpose_policy not in TRANSPOSE_POLICIES:
        raise ValueError(f"transpose_policy must be one of {TRANSPOSE_POLICIES}")
    X = as_matrix(X)
    transposed = transpose_policy == "always" or (
        transpose_policy == "auto" and X.shape[0] < X.shape[1])
    if transposed:
        X = X.T
    n, p = X.shape
    if d_min < 0 or d_min > d_max:
        raise DimensionError(f"need 0 <= d_min <= d_max, got d_min={d_min}, d_max={d_max}")
    if d_max >= p:
        raise DimensionError(f"d_max must be < p (d_max={d_max}, p={p})")
    plan = make_folds(n, K, seed)
    total = np.zeros(d_max - d_min + 1)
    capped = []
    # fixed fold order keeps the reduction deterministic
    for k, fold in enumerate(plan.folds):
        V, r_eff = fold_press(X, fold, d_min, d_max, k=k)
        total += V.sum(axis=0)
        if r_eff < d_max:
            capped.append((k, r_eff))
    values = total / n
    curve = DcvCurve(d_min=d_min, d_max=d_max, values=values, selected=d_min,
                     fold_plan=plan, transposed=transposed, rank_capped=capped)
    curve.selected = select_d(curve)
    return curve


def select_number_of_factors(X, K=10, d_max=8, d_min=0, seed=0):
    """Convenience wrapper returning only the selected number of factors."""
    return dcv_curve(X, K=K, d_min=d_min, d_max=d_max, seed=seed,
                     transpose_policy="auto").selected
