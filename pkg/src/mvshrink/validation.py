"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mvshrink.exceptions import ConfigError, RegimeError

#: Half-width of the excluded neighbourhood around p/n = 1.
GUARD_BAND = 0.05


def check_returns(Y: ArrayLike, *, min_obs: int = 2) -> NDArray[np.float64]:
    """Validate a p x n returns matrix (rows are assets, columns are time points)."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[np.newaxis, :]
    if Y.ndim != 2:
        raise ConfigError(f"returns matrix must be 2-D, got ndim={Y.ndim}")
    p, n = Y.shape
    if p < 1:
        raise ConfigError("returns matrix needs at least one asset")
    if n < min_obs:
        raise ConfigError(f"returns matrix needs at least {min_obs} observations, got {n}")
    if not np.all(np.isfinite(Y)):
        raise ConfigError("returns matrix contains non-finite values")
    return Y


def check_vector(x: ArrayLike, p: int | None = None, name: str = "vector") -> NDArray[np.float64]:
    x = np.asarray(x, dtype=np.float64).ravel()
    if p is not None and x.shape[0] != p:
        raise ConfigError(f"{name} has length {x.shape[0]}, expected {p}")
    if not np.all(np.isfinite(x)):
        raise ConfigError(f"{name} contains non-finite values")
    return x


def check_symmetric(
    M: ArrayLike, *, name: str = "matrix", psd: bool = False
) -> NDArray[np.float64]:
    """Validate a square symmetric matrix and return a float copy.

    Symmetry is checked to ``1e-10 * max|M|``. With ``psd=True`` the smallest
    eigenvalue may not fall below ``-1e-10 * trace / p``.
    """
    M = np.array(M, dtype=np.float64)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ConfigError(f"{name} contains non-finite values")
    scale = float(np.max(np.abs(M))) if M.size else 0.0
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * max(scale, 1e-300):
        raise ConfigError(f"{name} is not symmetric")
    if psd:
        p = M.shape[0]
        floor = -1e-10 * abs(np.trace(M)) / p
        if np.linalg.eigvalsh(M)[0] < floor:
            raise ConfigError(f"{name} is not positive semi-definite")
    return M


def check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not (gamma > 0) or not math.isfinite(gamma):
        raise ConfigError(f"risk aversion gamma must be positive and finite, got {gamma}")
    return gamma


def check_concentration(c: float) -> float:
    """Reject concentration ratios inside the unstable band around one."""
    c = float(c)
    if not (c > 0) or not math.isfinite(c):
        raise ConfigError(f"concentration ratio must be positive and finite, got {c}")
    if abs(c - 1.0) < GUARD_BAND:
        raise RegimeError(
            f"concentration too close to 1 (c={c:.4g}); values in "
            f"({1 - GUARD_BAND:g}, {1 + GUARD_BAND:g}) are excluded"
        )
    return c


def in_guard_band(c: float) -> bool:
    return abs(float(c) - 1.0) < GUARD_BAND
