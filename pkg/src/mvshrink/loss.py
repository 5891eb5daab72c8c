"""Expected quadratic utility and asymptotic relative losses.

A relative loss is ``(U_EU - U_strategy) / U_EU``, the fraction of the
optimal utility given up by an estimated strategy. The closed forms below are
almost-sure limits under ``p/n -> c``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import ArrayLike

from mvshrink._types import FrontierParams, PortfolioWeights, TargetStats
from mvshrink.exceptions import NumericalError
from mvshrink.shrinkage import _regime_factors
from mvshrink.validation import check_concentration, check_gamma

__all__ = [
    "LossReport",
    "utility",
    "optimal_utility",
    "relative_loss_traditional",
    "relative_loss_target",
    "relative_loss_gse",
    "relative_loss_gse_limit",
    "limit_moments",
    "loss_report",
]


@dataclass(frozen=True)
class LossReport:
    """Relative losses of the traditional, target and shrunk portfolios."""

    l_s: float
    l_b: float
    l_gse: float
    u_eu: float
    alpha: float
    l_gse_limit: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)


def utility(
    w: PortfolioWeights | ArrayLike, mu: ArrayLike, Sigma: ArrayLike, gamma: float
) -> float:
    """Mean-variance objective ``w'mu - (gamma/2) w'Sigma w``."""
    w = np.asarray(w, dtype=np.float64).ravel()
    mu = np.asarray(mu, dtype=np.float64).ravel()
    Sigma = np.asarray(Sigma, dtype=np.float64)
    if mu.shape[0] != w.shape[0] or Sigma.shape != (w.shape[0], w.shape[0]):
        raise ValueError("dimensions of w, mu and Sigma disagree")
    return float(w @ mu - 0.5 * gamma * (w @ Sigma @ w))


def optimal_utility(frontier: FrontierParams, gamma: float) -> float:
    """Utility of the population EU portfolio, ``R_GMV + s/(2 gamma) - gamma V_GMV / 2``."""
    gamma = check_gamma(gamma)
    return frontier.r_gmv + 0.5 * frontier.s / gamma - 0.5 * gamma * frontier.v_gmv


def _checked_u_eu(frontier: FrontierParams, gamma: float) -> float:
    u_eu = optimal_utility(frontier, gamma)
    if not u_eu > 0:
        raise NumericalError(f"relative loss undefined: optimal utility {u_eu:.4g} <= 0")
    return u_eu


def relative_loss_traditional(c: float, frontier: FrontierParams, gamma: float) -> float:
    """Limiting relative loss of the plug-in EU portfolio at concentration ``c``."""
    c = check_concentration(c)
    gamma = check_gamma(gamma)
    u_eu = _checked_u_eu(frontier, gamma)
    inflation, k1, k3 = _regime_factors(c)
    gap = (
        0.5 * gamma * (inflation - 1.0) * frontier.v_gmv
        + (0.5 - k1 + 0.5 * k3) * frontier.s / gamma
        + 0.5 * k3 * c / gamma
    )
    return gap / u_eu


def relative_loss_target(frontier: FrontierParams, tstats: TargetStats, gamma: float) -> float:
    """Relative loss ``(U_EU - U_b) / U_EU`` of holding the target portfolio."""
    gamma = check_gamma(gamma)
    u_eu = _checked_u_eu(frontier, gamma)
    u_b = tstats.r_b - 0.5 * gamma * tstats.v_b
    return (u_eu - u_b) / u_eu


def relative_loss_gse(alpha: float, l_s: float, l_b: float) -> float:
    """Limiting relative loss of the shrunk portfolio, ``alpha^2 l_s + (1-alpha)^2 l_b``."""
    return alpha * alpha * l_s + (1.0 - alpha) ** 2 * l_b


def limit_moments(
    c: float, frontier: FrontierParams, tstats: TargetStats, gamma: float
) -> tuple[float, float, float]:
    """Almost-sure limits of ``w'mu``, ``w'Sigma w`` and ``w'Sigma b`` for the plug-in EU weights w.

    These are the building blocks of the limiting intensity: its numerator
    and denominator are assembled from exactly these three moments.
    """
    c = check_concentration(c)
    gamma = check_gamma(gamma)
    inflation, k1, k3 = _regime_factors(c)
    r, v, s = frontier.r_gmv, frontier.v_gmv, frontier.s
    ret = r + k1 * s / gamma
    var = inflation * v + k3 * (s + c) / gamma**2
    cov_b = v + k1 * (tstats.r_b - r) / gamma
    return ret, var, cov_b


def relative_loss_gse_limit(
    alpha: float, c: float, frontier: FrontierParams, tstats: TargetStats, gamma: float
) -> float:
    """Limiting relative loss of ``alpha * w_hat + (1 - alpha) * b`` from the limit moments.

    Differs from :func:`relative_loss_gse` by the cross term
    ``alpha (1-alpha) (k1 - 1)(R_b - R_GMV - s/gamma) / U_EU``, where ``k1`` is
    ``1/(1-c)`` or ``1/(c(c-1))``. The cross term comes from the covariance
    between the estimation error of ``w_hat`` and the target's distance to the
    optimum; it vanishes only as c -> 0 or when the target is optimal.
    """
    u_eu = _checked_u_eu(frontier, check_gamma(gamma))
    ret, var, cov_b = limit_moments(c, frontier, tstats, gamma)
    a = float(alpha)
    u = a * ret + (1.0 - a) * tstats.r_b - 0.5 * gamma * (
        a * a * var + 2.0 * a * (1.0 - a) * cov_b + (1.0 - a) ** 2 * tstats.v_b
    )
    return (u_eu - u) / u_eu


def loss_report(
    c: float, frontier: FrontierParams, tstats: TargetStats, gamma: float, alpha: float
) -> LossReport:
    l_s = relative_loss_traditional(c, frontier, gamma)
    l_b = relative_loss_target(frontier, tstats, gamma)
    return LossReport(
        l_s=l_s,
        l_b=l_b,
        l_gse=relative_loss_gse(alpha, l_s, l_b),
        u_eu=optimal_utility(frontier, gamma),
        alpha=float(alpha),
        l_gse_limit=relative_loss_gse_limit(alpha, c, frontier, tstats, gamma),
    )
