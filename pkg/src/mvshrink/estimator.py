"""scikit-learn style estimator for the shrunk expected-utility portfolio."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from mvshrink._types import CalibrationMode, PortfolioWeights
from mvshrink.backtest import (
    TARGETS,
    certainty_equivalent,
    target_equal_correlation,
    target_equal_weight,
    target_fama_french,
)
from mvshrink.core import moore_penrose_pinv, sample_covariance
from mvshrink.exceptions import ConfigError
from mvshrink.frontier import (
    consistent_frontier_gt1,
    consistent_frontier_lt1,
    plugin_frontier,
    precision_matrix,
    target_stats,
)
from mvshrink.shrinkage import bona_fide_alpha, gse_weights, resolve_beta, sample_eu_weights
from mvshrink.validation import check_concentration


class ShrinkageEUPortfolio(BaseEstimator):
    """Expected-utility portfolio shrunk towards a target with a data-driven intensity.

    The intensity is a consistent estimate of the one that maximizes the
    out-of-sample mean-variance objective when the number of assets and the
    sample size grow together. Both ``n_assets < n_obs`` and
    ``n_assets > n_obs`` are supported; the latter uses the Moore-Penrose
    inverse of the sample covariance.

    Parameters
    ----------
    gamma : float, default=1.0
        Risk aversion of the expected-utility portfolio.
    calibration : {"mean_variance", "min_variance", "sharpe_ratio"}, default="mean_variance"
        Criterion the intensity optimizes.
    target : {"equal_weight", "equal_correlation", "fama_french"} or array-like, \
            default="equal_weight"
        Target portfolio. ``"fama_french"`` needs ``factors`` in :meth:`fit`.
    rank_tol : float, optional
        Relative eigenvalue cut-off for the pseudo-inverse.

    Attributes
    ----------
    weights_ : ndarray of shape (n_assets,)
        Shrunk portfolio weights.
    alpha_ : float
        Estimated shrinkage intensity.
    traditional_weights_ : ndarray of shape (n_assets,)
    target_weights_ : ndarray of shape (n_assets,)
    frontier_ : FrontierParams
        Consistent estimates of the efficient-frontier parameters.
    beta_ : float
        Resolved calibration parameter.
    c_hat_ : float
        ``n_assets / n_obs``.
    regime_ : str
        ``"c<1"`` or ``"c>1"``.

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> X = 0.01 + 0.1 * rng.standard_normal((250, 20))
    >>> est = ShrinkageEUPortfolio(gamma=5.0).fit(X)
    >>> round(float(est.weights_.sum()), 12)
    1.0
    """

    def __init__(self, gamma=1.0, calibration="mean_variance", target="equal_weight",
                 rank_tol=None):
        self.gamma = gamma
        self.calibration = calibration
        self.target = target
        self.rank_tol = rank_tol

    def _target_weights(self, Y, S, factors):
        p = Y.shape[0]
        t = self.target
        if not isinstance(t, str):
            return PortfolioWeights(np.asarray(t, dtype=np.float64), "target")
        if t == "equal_weight":
            return target_equal_weight(p)
        if t == "equal_correlation":
            return target_equal_correlation(S)
        if t == "fama_french":
            if factors is None:
                raise ConfigError("target='fama_french' needs factors")
            return target_fama_french(Y, np.asarray(factors, dtype=np.float64))
        raise ConfigError(f"unknown target {t!r}; choose from {TARGETS}")

    def fit(self, X, y=None, *, factors=None):
        """Estimate the weights from returns.

        Parameters
        ----------
        X : array-like of shape (n_obs, n_assets)
            Asset returns, one row per period.
        y : ignored
        factors : array-like of shape (n_obs, 3), optional
            Factor returns for the ``"fama_french"`` target.
        """
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        Y = X.T
        p, n = Y.shape
        mode = CalibrationMode(self.calibration, float(self.gamma))
        gamma = mode.gamma
        c_hat = check_concentration(p / n)
        S = sample_covariance(Y)
        ybar = Y.mean(axis=1)
        if c_hat < 1:
            w_trad = sample_eu_weights(precision_matrix(S, what="S"), ybar, gamma)
            frontier = consistent_frontier_lt1(plugin_frontier(S, ybar), c_hat)
        else:
            S_plus = moore_penrose_pinv(S, self.rank_tol)
            w_trad = sample_eu_weights(S_plus, ybar, gamma, "traditional_pinv")
            frontier = consistent_frontier_gt1(S_plus, ybar, c_hat)
        b = self._target_weights(Y, S, factors)
        if len(b) != p:
            raise ConfigError(f"target has {len(b)} weights, data has {p} assets")
        alpha = bona_fide_alpha(frontier, target_stats(b, S, ybar), c_hat, gamma, mode)
        self.weights_ = gse_weights(alpha, w_trad, b).w.copy()
        self.alpha_ = float(alpha)
        self.traditional_weights_ = w_trad.w.copy()
        self.target_weights_ = b.w.copy()
        self.frontier_ = frontier
        self.beta_ = resolve_beta(mode, frontier)
        self.c_hat_ = c_hat
        self.regime_ = "c<1" if c_hat < 1 else "c>1"
        self.n_features_in_ = p
        return self

    def predict(self, X):
        """Portfolio returns ``X @ weights_`` for rows of asset returns."""
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(f"X has {X.shape[1]} assets, fitted on {self.n_features_in_}")
        return X @ self.weights_

    def score(self, X, y=None):
        """Certainty equivalent of the realized portfolio returns on ``X``."""
        return certainty_equivalent(self.predict(X), float(self.gamma))
