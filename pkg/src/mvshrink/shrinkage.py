"""Shrinkage intensities and shrunk expected-utility portfolio weights.

The shrunk portfolio is ``alpha * w_hat + (1 - alpha) * b`` for a sample
expected-utility portfolio ``w_hat`` and a target ``b``. The intensity comes
in three flavours:

* :func:`finite_sample_alpha` -- the exact maximizer of the out-of-sample
  objective, which needs the true ``(mu, Sigma)``;
* :func:`oracle_alpha_limit` -- its almost-sure limit as ``p, n -> inf``
  with ``p/n -> c``, a function of the frontier parameters only;
* :func:`bona_fide_alpha` -- the same limit evaluated at consistent
  estimates of the frontier parameters, i.e. a feasible estimator.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from numpy.typing import ArrayLike

from mvshrink._types import (
    Calibration,
    CalibrationMode,
    FrontierParams,
    PortfolioWeights,
    TargetStats,
    as_weights,
)
from mvshrink.core import q_matrix
from mvshrink.exceptions import ConfigError, NumericalError, RegimeError
from mvshrink.frontier import gmv_weights, precision_matrix
from mvshrink.validation import check_concentration, check_gamma, check_vector

__all__ = [
    "resolve_beta",
    "eu_weights_true",
    "sample_eu_weights",
    "finite_sample_alpha",
    "oracle_alpha_limit",
    "bona_fide_alpha",
    "gse_weights",
    "shrinkage_objective",
]


def resolve_beta(mode: CalibrationMode, frontier: FrontierParams | None = None) -> float:
    """Map a calibration criterion to the beta of the unified objective.

    Mean-variance gives ``gamma``, minimum-variance gives ``math.inf`` and
    the Sharpe-ratio criterion gives ``R_GMV / V_GMV`` of ``frontier``.
    """
    if mode.beta_override is not None:
        return float(mode.beta_override)
    if mode.mode is Calibration.MEAN_VARIANCE:
        return float(mode.gamma)
    if mode.mode is Calibration.MIN_VARIANCE:
        return math.inf
    if frontier is None:
        raise ConfigError("Sharpe-ratio calibration needs frontier parameters")
    prefix = "Sharpe calibration" if frontier.source == "true" else "estimated Sharpe calibration"
    if not frontier.v_gmv > 0:
        raise NumericalError(f"{prefix} undefined: V_GMV <= 0")
    beta = frontier.r_gmv / frontier.v_gmv
    if not beta > 0:
        raise NumericalError(f"{prefix} undefined: R_GMV/V_GMV = {beta:.4g} <= 0")
    return beta


def eu_weights_true(mu: ArrayLike, Sigma: ArrayLike, gamma: float) -> PortfolioWeights:
    """Population expected-utility portfolio ``w_GMV + Q mu / gamma``."""
    gamma = check_gamma(gamma)
    Sinv = precision_matrix(Sigma)
    mu = check_vector(mu, Sinv.shape[0], "mu")
    w = gmv_weights(Sinv).w + q_matrix(Sinv) @ mu / gamma
    return PortfolioWeights(w, "true_eu")


def sample_eu_weights(
    S_inv_like: ArrayLike, ybar: ArrayLike, gamma: float, provenance: str = "traditional"
) -> PortfolioWeights:
    """Plug-in expected-utility weights from a sample (pseudo-)precision matrix.

    Pass the inverse sample covariance when p < n and its Moore-Penrose
    inverse (with ``provenance="traditional_pinv"``) otherwise.
    """
    gamma = check_gamma(gamma)
    M = np.asarray(S_inv_like, dtype=np.float64)
    ybar = check_vector(ybar, M.shape[0], "ybar")
    if not float(M.sum()) > 0:
        raise NumericalError("GMV denominator degenerate: 1'M1 <= 0")
    w = gmv_weights(M).w + q_matrix(M) @ ybar / gamma
    return PortfolioWeights(w, provenance)


def shrinkage_objective(alpha, w_hat, b, mu, Sigma, beta: float):
    """Out-of-sample objective ``w'mu - beta/2 w'Sigma w`` of the shrunk portfolio.

    Vectorized over ``alpha``.
    """
    w_hat = np.asarray(w_hat, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    Sigma = np.asarray(Sigma, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    d = w_hat - b
    r_b, r_d = b @ mu, d @ mu
    v_bb, v_bd, v_dd = b @ Sigma @ b, b @ Sigma @ d, d @ Sigma @ d
    a = np.asarray(alpha, dtype=np.float64)
    ret = r_b + a * r_d
    var = v_bb + 2 * a * v_bd + a * a * v_dd
    return ret - 0.5 * beta * var


def finite_sample_alpha(
    w_hat: PortfolioWeights | ArrayLike,
    b: PortfolioWeights | ArrayLike,
    mu: ArrayLike,
    Sigma: ArrayLike,
    beta: float,
) -> float:
    """Exact maximizer over alpha of the out-of-sample objective.

    ``alpha = (w_hat-b)'(mu - beta Sigma b) / (beta (w_hat-b)'Sigma(w_hat-b))``.
    Needs the true moments, so it is an oracle quantity. ``beta = inf``
    gives the variance-minimizing intensity.
    """
    w_hat = np.asarray(w_hat, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    Sigma = np.asarray(Sigma, dtype=np.float64)
    mu = check_vector(mu, w_hat.shape[0], "mu")
    beta = float(beta)
    if not beta > 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    d = w_hat - b
    curvature = float(d @ Sigma @ d)
    scale = float(np.abs(np.diag(Sigma)).max()) * max(float(d @ d), 0.0)
    if curvature <= 1e-14 * max(scale, 1e-300) or not np.any(d):
        raise NumericalError("estimator coincides with target: (w_hat-b)'Sigma(w_hat-b) is zero")
    variance_term = -float(d @ Sigma @ b) / curvature
    if math.isinf(beta):
        return variance_term
    return float(d @ mu) / (beta * curvature) + variance_term


def _regime_factors(c: float) -> tuple[float, float, float]:
    """(variance inflation, first-order factor, third-order factor) for ratio c."""
    if c < 1:
        k1 = 1.0 / (1.0 - c)
        return k1, k1, k1**3
    return c * c / (c - 1.0), 1.0 / (c * (c - 1.0)), 1.0 / (c - 1.0) ** 3


def _alpha_limit(r, v, s, r_b, v_b, c, gamma, beta) -> float:
    inflation, k1, k3 = _regime_factors(c)
    ginv = 1.0 / gamma
    # numerator divided through by beta so that beta = inf is a plain limit
    num = (r - r_b) * k1 * ginv + (v_b - v)
    if not math.isinf(beta):
        num += (r - r_b) / beta + ginv * k1 * s / beta
    den = inflation * v - 2.0 * (v + ginv * k1 * (r_b - r)) + ginv**2 * k3 * (s + c) + v_b
    if not den > 0:
        raise NumericalError(
            f"shrinkage denominator is {den:.4g} <= 0: inconsistent frontier parameters"
        )
    return num / den


def oracle_alpha_limit(
    frontier: FrontierParams,
    tstats: TargetStats,
    c: float,
    gamma: float,
    beta: float,
) -> float:
    """Limiting optimal intensity for concentration ``c`` (either regime).

    Parameters
    ----------
    frontier : FrontierParams
        Population ``(R_GMV, V_GMV, s)``.
    tstats : TargetStats
        Population return and variance of the target.
    c : float
        Concentration ratio, outside the guard band around 1.
    gamma : float
        Risk aversion of the expected-utility portfolio being shrunk.
    beta : float
        Calibration parameter; ``math.inf`` selects the minimum-variance limit.
    """
    c = check_concentration(c)
    gamma = check_gamma(gamma)
    beta = float(beta)
    if not beta > 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    return _alpha_limit(
        frontier.r_gmv, frontier.v_gmv, frontier.s, tstats.r_b, tstats.v_b, c, gamma, beta
    )


def bona_fide_alpha(
    frontier_est: FrontierParams,
    tstats_est: TargetStats,
    c_hat: float,
    gamma: float,
    mode: CalibrationMode,
) -> float:
    """Feasible shrinkage intensity from consistent frontier estimates.

    A negative slope estimate (possible in small samples) is clamped to zero
    with a ``RuntimeWarning`` before it enters the formula.
    """
    c_hat = check_concentration(c_hat)
    expected = "consistent_lt1" if c_hat < 1 else "consistent_gt1"
    if frontier_est.source != expected:
        raise RegimeError(
            f"frontier source {frontier_est.source!r} does not match c_hat={c_hat:.4g}"
        )
    beta = resolve_beta(mode, frontier_est)
    s = frontier_est.s
    if s < 0:
        # constant message so the default filter reports it once per call site
        warnings.warn("negative estimated slope parameter clamped to 0", RuntimeWarning,
                      stacklevel=2)
        s = 0.0
    return oracle_alpha_limit(
        FrontierParams(frontier_est.r_gmv, frontier_est.v_gmv, s, source=frontier_est.source),
        tstats_est,
        c_hat,
        gamma,
        beta,
    )


def gse_weights(
    alpha: float,
    w_hat: PortfolioWeights | ArrayLike,
    b: PortfolioWeights | ArrayLike,
    provenance: str = "bona_fide",
) -> PortfolioWeights:
    """Affine combination ``alpha * w_hat + (1 - alpha) * b``; alpha is not clipped."""
    w_hat = as_weights(w_hat, "traditional")
    b = as_weights(b)
    if len(w_hat) != len(b):
        raise ConfigError("w_hat and b have different lengths")
    alpha = float(alpha)
    return PortfolioWeights(alpha * w_hat.w + (1.0 - alpha) * b.w, provenance, alpha=alpha)
