"""Sample moments, (pseudo-)inverses and the GMV projection matrix.

All functions take the returns matrix in the p x n orientation (assets in
rows, observations in columns) and use the 1/n covariance divisor throughout.
The high-dimensional correction factors elsewhere in the package assume that
divisor, so do not substitute ``np.cov``'s default 1/(n-1).
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mvshrink.exceptions import ConfigError, NumericalError
from mvshrink.validation import check_returns, check_symmetric, check_vector

__all__ = [
    "sample_mean",
    "sample_covariance",
    "moore_penrose_pinv",
    "sqrtm_psd",
    "generalized_inverse_oracle",
    "rank_one_pinv_update",
    "q_matrix",
]


def sample_mean(Y: ArrayLike) -> NDArray[np.float64]:
    """Row means of a p x n returns matrix."""
    Y = check_returns(Y, min_obs=1)
    return Y.mean(axis=1)


def sample_covariance(Y: ArrayLike) -> NDArray[np.float64]:
    """Sample covariance ``(1/n) sum_t (y_t - ybar)(y_t - ybar)'``.

    Parameters
    ----------
    Y : array-like of shape (p, n)
        Asset returns, one row per asset.

    Returns
    -------
    S : ndarray of shape (p, p)
        Symmetric PSD matrix of rank at most ``min(p, n - 1)``.
    """
    Y = check_returns(Y, min_obs=2)
    n = Y.shape[1]
    centered = Y - Y.mean(axis=1, keepdims=True)
    S = centered @ centered.T / n
    return 0.5 * (S + S.T)


def _default_rank_tol(p: int) -> float:
    return 1e-10 * p


def moore_penrose_pinv(S: ArrayLike, rank_tol: float | None = None) -> NDArray[np.float64]:
    """Moore-Penrose inverse of a symmetric matrix via ``eigh``.

    Eigenvalues with ``|lambda| <= rank_tol * max|lambda|`` are treated as zero.
    ``rank_tol`` defaults to ``1e-10 * p``.
    """
    S = check_symmetric(S, name="S")
    p = S.shape[0]
    tol = _default_rank_tol(p) if rank_tol is None else float(rank_tol)
    lam, U = np.linalg.eigh(S)
    top = np.max(np.abs(lam), initial=0.0)
    if top == 0.0:
        return np.zeros_like(S)
    keep = np.abs(lam) > tol * top
    inv = np.zeros_like(lam)
    inv[keep] = 1.0 / lam[keep]
    out = (U * inv) @ U.T
    return 0.5 * (out + out.T)


def sqrtm_psd(Sigma: ArrayLike, *, inverse: bool = False) -> NDArray[np.float64]:
    """Symmetric square root (or inverse square root) of a PSD matrix."""
    Sigma = check_symmetric(Sigma, name="Sigma")
    lam, U = np.linalg.eigh(Sigma)
    if inverse:
        if lam[0] <= 1e-14 * max(lam[-1], 1e-300):
            raise NumericalError("Sigma is not positive definite")
        root = (U / np.sqrt(lam)) @ U.T
    else:
        root = (U * np.sqrt(np.clip(lam, 0.0, None))) @ U.T
    return 0.5 * (root + root.T)


def generalized_inverse_oracle(
    Sigma: ArrayLike,
    X: ArrayLike,
    xbar: ArrayLike | None = None,
    rank_tol: float | None = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Generalized inverse of ``S = Sigma^{1/2} V Sigma^{1/2}`` built from the true Sigma.

    ``V = XX'/n - xbar xbar'`` and the returned inverse is
    ``Sigma^{-1/2} V^+ Sigma^{-1/2}``. It satisfies ``G S G = G`` and
    ``S G S = S`` but, unless Sigma is spherical, not the symmetry conditions
    of the Moore-Penrose inverse. Requires the true covariance, so this is a
    verification device and not a feasible estimator.

    Returns
    -------
    S_star : ndarray of shape (p, p)
    S : ndarray of shape (p, p)
        The matching sample covariance, for convenience.
    """
    Sigma = check_symmetric(Sigma, name="Sigma")
    X = check_returns(X, min_obs=1)
    p, n = X.shape
    if Sigma.shape[0] != p:
        raise ConfigError(f"Sigma is {Sigma.shape[0]}x{Sigma.shape[0]} but X has {p} rows")
    xbar = X.mean(axis=1) if xbar is None else check_vector(xbar, p, "xbar")
    V = X @ X.T / n - np.outer(xbar, xbar)
    V = 0.5 * (V + V.T)
    root = sqrtm_psd(Sigma)
    inv_root = sqrtm_psd(Sigma, inverse=True)
    S_star = inv_root @ moore_penrose_pinv(V, rank_tol) @ inv_root
    S = root @ V @ root
    return S_star, 0.5 * (S + S.T)


def rank_one_pinv_update(
    Vplus_tilde: ArrayLike, xbar: ArrayLike, *, tol: float = 1e-8
) -> NDArray[np.float64]:
    """Pseudo-inverse of ``V~ - xbar xbar'`` from the pseudo-inverse of ``V~``.

    ``xbar`` must lie in the column space of ``V~``. Two cases:

    * ``xbar' V~^+ xbar = 1`` (the subtraction drops the rank, as happens
      when ``V~ = XX'/n`` with p > n and ``xbar = X1/n``): Meyer's three-term
      update.
    * otherwise the Sherman-Morrison form
      ``V~^+ + V~^+ xbar xbar' V~^+ / (1 - xbar' V~^+ xbar)``.
    """
    A = check_symmetric(Vplus_tilde, name="Vplus_tilde")
    x = check_vector(xbar, A.shape[0], "xbar")
    if not np.any(x):
        return A.copy()
    k = A @ x
    k2 = A @ k
    a1 = float(x @ k)
    a2 = float(x @ k2)
    scale = float(np.linalg.norm(A, 2)) ** 2 * float(x @ x)
    if a2 <= 1e-14 * scale:
        raise NumericalError("rank-one update is singular: xbar' (V~^+)^2 xbar is zero")
    beta = 1.0 - a1
    if abs(beta) > tol:
        out = A + np.outer(k, k) / beta
    else:
        a3 = float(k @ k2)
        out = A - (np.outer(k, k2) + np.outer(k2, k)) / a2 + (a3 / a2**2) * np.outer(k, k)
    return 0.5 * (out + out.T)


def q_matrix(Sinv: ArrayLike) -> NDArray[np.float64]:
    """Projection ``M - M11'M / (1'M1)`` with ``Q 1 = 0``.

    Applies equally to the true precision matrix, the inverse sample
    covariance, its Moore-Penrose inverse, or the generalized inverse.
    """
    M = np.asarray(Sinv, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"Sinv must be square, got shape {M.shape}")
    m1 = M.sum(axis=1)
    denom = float(m1.sum())
    if abs(denom) <= 1e-14 * M.shape[0] * max(np.max(np.abs(M)), 1e-300):
        raise NumericalError("GMV denominator degenerate: 1'M1 is zero")
    m1_row = M.sum(axis=0)
    Q = M - np.outer(m1, m1_row) / denom
    if np.allclose(M, M.T, rtol=0, atol=1e-12 * max(np.max(np.abs(M)), 1e-300)):
        Q = 0.5 * (Q + Q.T)
    return Q
