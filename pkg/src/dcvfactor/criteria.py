"""Bai-Ng panel information criterion IC1, used as the comparison baseline."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .spectra import as_matrix, gram_eigen


@dataclass
class IcCurve:
    d_min: int
    d_max: int
    v_values: np.ndarray
    ic_values: np.ndarray
    selected: int

    @property
    def ds(self):
        return np.arange(self.d_min, self.d_max + 1)


def ic1_penalty(n, p):
    """Per-factor IC1 penalty ``(n + p) / (n p) * ln(n p / (n + p))``."""
    n, p = float(n), float(p)
    return (n + p) / (n * p) * np.log(n * p / (n + p))


def _tail_variances(eigen, n, p, ds):
    # suffix sums of the spectrum: tail[d] = sum_{t >= d} lambda_t
    tail = np.concatenate([np.cumsum(eigen.values[::-1])[::-1], [0.0]])
    return np.array([tail[d] for d in ds]) / (n * p)


def residual_variance(X, d):
    """Mean squared residual of the rank-``d`` principal-component fit.

    Uses the closed form ``sum_{t > d} lambda_t / (n p)``, so a matrix of
    exact rank ``d`` gives exactly 0.
    """
    X = as_matrix(X)
    n, p = X.shape
    if d < 0 or d > min(n, p):
        raise DimensionError(f"d={d} must lie in [0, min(n, p)={min(n, p)}]")
    return float(_tail_variances(gram_eigen(X), n, p, [d])[0])


def ic1_curve(X, d_min=0, d_max=8):
    """IC1 over ``d_min..d_max``; the smallest minimiser is selected.

    ``V(d) == 0`` is mapped to ``-inf`` so the first exact fit wins.
    """
    X = as_matrix(X)
    n, p = X.shape
    if d_min < 0 or d_min > d_max:
        raise DimensionError(f"need 0 <= d_min <= d_max, got d_min={d_min}, d_max={d_max}")
    if d_max >= min(n, p):
        raise DimensionError(f"d_max must be < min(n, p)={min(n, p)} (d_max={d_max})")
    ds = np.arange(d_min, d_max + 1)
    v = _tail_variances(gram_eigen(X), n, p, ds)
    with np.errstate(divide="ignore"):
        ic = np.log(v) + ds * ic1_penalty(n, p)
    ic[v == 0] = -np.inf
    selected = int(ds[np.flatnonzero(ic == ic.min())[0]])
    return IcCurve(d_min=d_min, d_max=d_max, v_values=v, ic_values=ic, selected=selected)
