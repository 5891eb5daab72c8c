"""Efficient-frontier parameters and their high-dimensional estimators."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mvshrink._types import FrontierParams, PortfolioWeights, TargetStats, as_weights
from mvshrink.core import q_matrix
from mvshrink.exceptions import ConfigError, NumericalError, RegimeError
from mvshrink.validation import check_symmetric, check_vector, in_guard_band

__all__ = [
    "gmv_weights",
    "precision_matrix",
    "true_frontier",
    "plugin_frontier",
    "consistent_frontier_lt1",
    "consistent_frontier_gt1",
    "consistent_frontier_oracle_gt1",
    "target_stats",
]

GT1_NOTE = "Moore-Penrose approximation, exact when Sigma is proportional to the identity"


def gmv_weights(Sinv: ArrayLike, provenance: str = "gmv") -> PortfolioWeights:
    """Global minimum-variance weights ``M1 / 1'M1`` for a (pseudo-)precision matrix M."""
    M = np.asarray(Sinv, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"Sinv must be square, got shape {M.shape}")
    m1 = M.sum(axis=1)
    denom = float(m1.sum())
    if abs(denom) <= 1e-14 * M.shape[0] * max(np.max(np.abs(M)), 1e-300):
        raise NumericalError("GMV denominator degenerate: 1'M1 is zero")
    w = m1 / denom
    return PortfolioWeights(w / w.sum(), provenance)


def precision_matrix(Sigma: ArrayLike, *, what: str = "Sigma") -> NDArray[np.float64]:
    """Inverse of a positive definite matrix; raises NumericalError if singular."""
    Sigma = check_symmetric(Sigma, name=what)
    lam, U = np.linalg.eigh(Sigma)
    if lam[0] <= 1e-12 * max(abs(lam[-1]), 1e-300):
        raise NumericalError(f"{what} is singular or not positive definite")
    inv = (U / lam) @ U.T
    return 0.5 * (inv + inv.T)


def _frontier(Minv: NDArray[np.float64], mu: NDArray[np.float64], source: str) -> FrontierParams:
    ones_m = Minv.sum(axis=1)
    d = float(ones_m.sum())
    if not d > 0:
        raise NumericalError("1'M1 must be positive")
    Q = q_matrix(Minv)
    return FrontierParams(
        r_gmv=float(ones_m @ mu) / d,
        v_gmv=1.0 / d,
        s=float(mu @ Q @ mu),
        source=source,
    )


def true_frontier(mu: ArrayLike, Sigma: ArrayLike) -> FrontierParams:
    """Frontier parameters ``(1'S^-1 mu / 1'S^-1 1, 1 / 1'S^-1 1, mu'Q mu)`` of the population."""
    Sinv = precision_matrix(Sigma)
    mu = check_vector(mu, Sinv.shape[0], "mu")
    return _frontier(Sinv, mu, "true")


def plugin_frontier(S: ArrayLike, ybar: ArrayLike) -> FrontierParams:
    """Traditional plug-in frontier using the sample covariance and sample mean."""
    try:
        Sinv = precision_matrix(S, what="S")
    except NumericalError:
        raise NumericalError("plug-in frontier requires p < n (S is singular)") from None
    ybar = check_vector(ybar, Sinv.shape[0], "ybar")
    return _frontier(Sinv, ybar, "plugin")


def consistent_frontier_lt1(plugin: FrontierParams, c_hat: float) -> FrontierParams:
    """Bias-corrected frontier for ``0 < p/n < 1``.

    The GMV return needs no correction; the GMV variance is inflated by
    ``1/(1-c)`` and the slope becomes ``(1-c) s - c``.
    """
    c_hat = float(c_hat)
    if not c_hat > 0:
        raise ConfigError(f"c_hat must be positive, got {c_hat}")
    if c_hat >= 1:
        raise RegimeError(f"c_hat={c_hat:.4g} >= 1: use the c>1 path")
    return FrontierParams(
        r_gmv=plugin.r_gmv,
        v_gmv=plugin.v_gmv / (1.0 - c_hat),
        s=(1.0 - c_hat) * plugin.s - c_hat,
        source="consistent_lt1",
    )


def consistent_frontier_gt1(S_plus: ArrayLike, ybar: ArrayLike, c_hat: float) -> FrontierParams:
    """Frontier estimates for ``p/n > 1`` built on the Moore-Penrose inverse.

    These replace the infeasible generalized inverse by ``S^+`` and are only
    approximations unless the population covariance is spherical; the result
    carries a note saying so.
    """
    c_hat = float(c_hat)
    if c_hat <= 1:
        raise RegimeError(f"c_hat={c_hat:.4g} <= 1: use the c<1 path")
    Sp = np.asarray(S_plus, dtype=np.float64)
    ybar = check_vector(ybar, Sp.shape[0], "ybar")
    ones_s = Sp.sum(axis=1)
    d = float(ones_s.sum())
    if not d > 1e-14 * Sp.shape[0] * max(np.max(np.abs(Sp)), 1e-300):
        raise NumericalError("degenerate 1'S^+1")
    Qp = q_matrix(Sp)
    return FrontierParams(
        r_gmv=float(ybar @ ones_s) / d,
        v_gmv=1.0 / (c_hat * (c_hat - 1.0)) / d,
        s=c_hat * ((c_hat - 1.0) * float(ybar @ Qp @ ybar) - 1.0),
        source="consistent_gt1",
        note=GT1_NOTE,
    )


def consistent_frontier_oracle_gt1(plugin_star: FrontierParams, c_hat: float) -> FrontierParams:
    """Corrections for ``p/n > 1`` applied to plug-in values built on the generalized inverse."""
    c_hat = float(c_hat)
    if c_hat <= 1 or in_guard_band(c_hat):
        raise RegimeError(f"c_hat={c_hat:.4g} is not in the c>1 regime")
    return FrontierParams(
        r_gmv=plugin_star.r_gmv,
        v_gmv=plugin_star.v_gmv / (c_hat * (c_hat - 1.0)),
        s=c_hat * ((c_hat - 1.0) * plugin_star.s - 1.0),
        source="consistent_gt1",
    )


def target_stats(b: PortfolioWeights | ArrayLike, S: ArrayLike, ybar: ArrayLike) -> TargetStats:
    """Plug-in return ``b'ybar`` and variance ``b'S b`` of a target portfolio."""
    b = as_weights(b)
    S = np.asarray(S, dtype=np.float64)
    ybar = check_vector(ybar, len(b), "ybar")
    v_b = float(b.w @ S @ b.w)
    return TargetStats(r_b=float(b.w @ ybar), v_b=max(v_b, 0.0))
