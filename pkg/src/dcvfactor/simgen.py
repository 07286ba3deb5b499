"""Simulated factor panels ``x_is = sum_j f_ij l_sj + sqrt(theta) e_is``.

Factors and loadings are iid N(0, 1). Idiosyncratic errors follow one of
five settings:

E1  iid N(0, 1)
E2  iid Student t with 3 degrees of freedom (unscaled)
E3  N(0, delta_s), delta_s = 1 for odd and 2 for even (1-based) columns
E4  AR(1) across columns, coefficient 0.3, started at stationarity
E5  moving average across rows, weights 0.15^|j| for j = -10..10
"""
import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

ERROR_MODELS = ("E1", "E2", "E3", "E4", "E5")

# substream offsets under a configuration seed
STREAM_FACTORS = 0
STREAM_LOADINGS = 1
STREAM_ERRORS = 2

AR_COEF = 0.3
MA_BASE = 0.15
MA_HALF_WIDTH = 10
T_DOF = 3


def substream(seed, *key):
    """Independent generator for ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


@dataclass(frozen=True)
class SimConfig:
    n: int
    p: int
    theta: float
    error_model: str = "E1"
    d0: int = 5
    seed: int = 0
    literal_e5: bool = False

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise DimensionError(f"n and p must be positive, got n={self.n}, p={self.p}")
        if self.d0 < 0:
            raise DimensionError(f"d0 must be nonnegative, got {self.d0}")
        if not self.theta >= 0:
            raise ValueError(f"theta must be nonnegative, got {self.theta}")
        if self.error_model not in ERROR_MODELS:
            raise ValueError(f"unknown error model {self.error_model!r}")


@dataclass(frozen=True)
class SimDraw:
    X: np.ndarray
    F0: np.ndarray
    L0: np.ndarray
    E: np.ndarray
    config: SimConfig

    def digest(self):
        return hashlib.sha256(np.ascontiguousarray(self.X).tobytes()).hexdigest()


def ma_weights(literal=False):
    j = np.arange(-MA_HALF_WIDTH, MA_HALF_WIDTH + 1)
    # the literal form 0.15**j blows up for negative j; kept only as an option
    return MA_BASE ** (j if literal else np.abs(j)).astype(float)


def gen_errors(model, n, p, rng, literal_e5=False):
    """Draw an ``n x p`` idiosyncratic error matrix."""
    if n < 1 or p < 1:
        raise DimensionError(f"n and p must be positive, got n={n}, p={p}")
    if model == "E1":
        return rng.standard_normal((n, p))
    if model == "E2":
        return rng.standard_t(T_DOF, size=(n, p))
    if model == "E3":
        sd = np.where(np.arange(1, p + 1) % 2 == 1, 1.0, np.sqrt(2.0))
        return rng.standard_normal((n, p)) * sd
    if model == "E4":
        nu = rng.standard_normal((n, p))
        e = np.empty((n, p))
        e[:, 0] = nu[:, 0] / np.sqrt(1.0 - AR_COEF**2)
        for s in range(1, p):
            e[:, s] = AR_COEF * e[:, s - 1] + nu[:, s]
        return e
    if model == "E5":
        h = MA_HALF_WIDTH
        nu = rng.standard_normal((n + 2 * h, p))
        c = ma_weights(literal_e5)
        e = np.zeros((n, p))
        # row i (0-based) sums c_j * nu[i + h - j] over j = -h..h
        for idx, j in enumerate(range(-h, h + 1)):
            e += c[idx] * nu[h - j: h - j + n]
        return e
    raise ValueError(f"unknown error model {model!r}")


def gen_factor_data(cfg):
    """Draw a panel from the configured factor model."""
    F0 = substream(cfg.seed, STREAM_FACTORS).standard_normal((cfg.n, cfg.d0))
    L0 = substream(cfg.seed, STREAM_LOADINGS).standard_normal((cfg.p, cfg.d0))
    E = gen_errors(cfg.error_model, cfg.n, cfg.p, substream(cfg.seed, STREAM_ERRORS),
                   literal_e5=cfg.literal_e5)
    X = F0 @ L0.T + np.sqrt(cfg.theta) * E
    return SimDraw(X=X, F0=F0, L0=L0, E=E, config=cfg)
