import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import random_spd, random_weights
from mvshrink._types import CalibrationMode, FrontierParams, PortfolioWeights, TargetStats
from mvshrink.core import sample_covariance
from mvshrink.exceptions import ConfigError, NumericalError, RegimeError
from mvshrink.frontier import (
    consistent_frontier_lt1,
    gmv_weights,
    plugin_frontier,
    target_stats,
    true_frontier,
)
from mvshrink.shrinkage import (
    bona_fide_alpha,
    eu_weights_true,
    finite_sample_alpha,
    gse_weights,
    oracle_alpha_limit,
    resolve_beta,
    sample_eu_weights,
    shrinkage_objective,
)

FIXED = FrontierParams(0.05, 0.04, 0.25)
FIXED_T = TargetStats(0.03, 0.09)


def kkt_eu_weights(mu, Sigma, gamma):
    """Maximize w'mu - gamma/2 w'Sigma w s.t. 1'w = 1 by solving the KKT system."""
    p = len(mu)
    K = np.zeros((p + 1, p + 1))
    K[:p, :p] = gamma * Sigma
    K[:p, p] = 1.0
    K[p, :p] = 1.0
    rhs = np.concatenate([mu, [1.0]])
    return np.linalg.solve(K, rhs)[:p]


def alpha_limit_oracle(fr, ts, c, gamma, beta):
    """Intensity limit written in its unscaled form, multiplied out by 1/beta at the end."""
    if c < 1:
        k1 = 1 / (1 - c)
        var_factor, k3 = 1 / (1 - c), 1 / (1 - c) ** 3
    else:
        k1 = 1 / (c * (c - 1))
        var_factor, k3 = c**2 / (c - 1), 1 / (c - 1) ** 3
    num = ((fr.r_gmv - ts.r_b) * (1 + beta / gamma * k1) + beta * (ts.v_b - fr.v_gmv)
           + k1 * fr.s / gamma)
    den = (var_factor * fr.v_gmv - 2 * (fr.v_gmv + k1 / gamma * (ts.r_b - fr.r_gmv))
           + k3 * (fr.s + c) / gamma**2 + ts.v_b)
    return num / den / beta


# --- eu_weights_true ---------------------------------------------------------


def test_eu_weights_two_asset_example():
    w = eu_weights_true([0.2, 0.0], np.eye(2), 1.0)
    assert np.allclose(w.w, [0.6, 0.4], atol=1e-15)
    assert w.provenance == "true_eu"


def test_eu_weights_constant_mean_is_gmv(rng):
    Sigma = random_spd(5, rng)
    w = eu_weights_true(np.full(5, 0.07), Sigma, 3.0)
    assert np.allclose(w.w, gmv_weights(np.linalg.inv(Sigma)).w, atol=1e-12)


def test_eu_weights_match_kkt_oracle(rng):
    Sigma = random_spd(8, rng)
    mu = rng.normal(size=8) * 0.1
    w = eu_weights_true(mu, Sigma, 2.5)
    assert np.allclose(w.w, kkt_eu_weights(mu, Sigma, 2.5), atol=1e-8)


def test_eu_weights_singular_sigma():
    with pytest.raises(NumericalError):
        eu_weights_true([0.1, 0.2], np.ones((2, 2)), 1.0)


# --- sample_eu_weights -------------------------------------------------------


def test_sample_eu_zero_mean_is_gmv(rng):
    M = np.linalg.inv(random_spd(4, rng))
    assert np.allclose(sample_eu_weights(M, np.zeros(4), 1.0).w, gmv_weights(M).w)


def test_sample_eu_large_gamma_tends_to_gmv(rng):
    M = np.linalg.inv(random_spd(4, rng))
    w = sample_eu_weights(M, rng.normal(size=4), 1e8).w
    assert np.allclose(w, gmv_weights(M).w, atol=1e-6)


def test_sample_eu_matches_kkt_on_plugins(rng):
    Y = rng.normal(size=(4, 40)) + 0.05
    S = sample_covariance(Y)
    ybar = Y.mean(axis=1)
    w = sample_eu_weights(np.linalg.inv(S), ybar, 1.7)
    assert np.allclose(w.w, kkt_eu_weights(ybar, S, 1.7), atol=1e-12)


def test_sample_eu_pinv_provenance(rng):
    w = sample_eu_weights(np.eye(3), np.zeros(3), 1.0, "traditional_pinv")
    assert w.provenance == "traditional_pinv"


def test_sample_eu_degenerate_denominator():
    with pytest.raises(NumericalError):
        sample_eu_weights(-np.eye(2), np.zeros(2), 1.0)


# --- finite_sample_alpha -----------------------------------------------------


def test_finite_alpha_maximizes_objective(rng):
    Sigma = random_spd(6, rng)
    mu = rng.normal(size=6) * 0.2
    w_hat = eu_weights_true(mu, Sigma, 1.0).w
    b = np.full(6, 1 / 6)
    a = finite_sample_alpha(w_hat, b, mu, Sigma, 1.0)
    u = lambda x: shrinkage_objective(x, w_hat, b, mu, Sigma, 1.0)
    assert u(a) >= u(0.0) - 1e-15 and u(a) >= u(1.0) - 1e-15


def test_finite_alpha_two_asset_grid_search():
    w_hat = np.array([0.6, 0.4])
    b = w_hat + 0.1 * np.array([1.0, -1.0])
    mu = np.array([0.2, 0.0])
    a = finite_sample_alpha(w_hat, b, mu, np.eye(2), 1.0)
    grid = np.linspace(-3, 3, 6_000_001)
    best = grid[np.argmax(shrinkage_objective(grid, w_hat, b, mu, np.eye(2), 1.0))]
    assert a == pytest.approx(best, abs=1e-6)


def test_finite_alpha_sharpe_calibration_beats_endpoints(rng):
    p = 10
    Sigma = random_spd(p, rng, cond=10.0) / 10
    mu = np.linspace(0.05, 0.3, p)
    fr = true_frontier(mu, Sigma)
    beta = resolve_beta(CalibrationMode("sharpe_ratio"), fr)
    b = np.full(p, 1 / p)
    sharpe = lambda w: (w @ mu) / math.sqrt(w @ Sigma @ w)
    checked = 0
    for _ in range(20):
        Y = mu[:, None] + np.linalg.cholesky(Sigma) @ rng.normal(size=(p, 60))
        w_hat = sample_eu_weights(np.linalg.inv(sample_covariance(Y)), Y.mean(axis=1), 1.0).w
        if w_hat @ mu <= 0:
            continue
        a = finite_sample_alpha(w_hat, b, mu, Sigma, beta)
        w = gse_weights(a, w_hat, b).w
        assert sharpe(w) >= max(sharpe(w_hat), sharpe(b)) - 1e-12
        checked += 1
    assert checked >= 10


def test_finite_alpha_min_variance_limit(rng):
    Sigma = random_spd(5, rng)
    mu = rng.normal(size=5)
    w_hat, b = random_weights(5, rng), random_weights(5, rng)
    a_inf = finite_sample_alpha(w_hat, b, mu, Sigma, math.inf)
    a_big = finite_sample_alpha(w_hat, b, mu, Sigma, 1e10)
    assert a_inf == pytest.approx(a_big, rel=1e-7, abs=1e-9)
    # minimizes variance along the line
    var = lambda x: shrinkage_objective(x, w_hat, b, np.zeros(5), Sigma, 2.0)
    assert var(a_inf) >= max(var(a_inf - 1e-3), var(a_inf + 1e-3))


def test_finite_alpha_coincident_estimator():
    with pytest.raises(NumericalError, match="coincides"):
        finite_sample_alpha([0.5, 0.5], [0.5, 0.5], [0.1, 0.2], np.eye(2), 1.0)


# --- oracle_alpha_limit ------------------------------------------------------


def test_limit_matches_unscaled_oracle(rng):
    for _ in range(200):
        fr = FrontierParams(rng.normal(0, 0.1), rng.uniform(0.01, 1), rng.uniform(0, 5))
        ts = TargetStats(rng.normal(0, 0.1), rng.uniform(0.01, 2))
        c = rng.choice([rng.uniform(0.01, 0.94), rng.uniform(1.06, 5)])
        gamma, beta = rng.uniform(0.2, 10), rng.uniform(0.2, 10)
        try:
            got = oracle_alpha_limit(fr, ts, c, gamma, beta)
        except NumericalError:
            continue
        assert got == pytest.approx(alpha_limit_oracle(fr, ts, c, gamma, beta), rel=1e-10,
                                    abs=1e-12)


def test_limit_gmv_target_small_c_is_one():
    fr = FrontierParams(0.05, 0.04, 0.25)
    ts = TargetStats(fr.r_gmv, fr.v_gmv)
    assert oracle_alpha_limit(fr, ts, 1e-9, 2.0, 2.0) == pytest.approx(1.0, abs=1e-6)


def test_limit_beta_infinity_matches_large_beta():
    a_inf = oracle_alpha_limit(FIXED, FIXED_T, 0.4, 1.0, math.inf)
    a_big = oracle_alpha_limit(FIXED, FIXED_T, 0.4, 1.0, 1e8)
    assert a_inf == pytest.approx(a_big, rel=1e-6)


def test_limit_falls_to_zero_near_one():
    vals = [oracle_alpha_limit(FIXED, FIXED_T, c, 1.0, 1.0) for c in (0.8, 0.9, 0.95)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 0.5 * vals[0]


def test_limit_guard_band():
    with pytest.raises(RegimeError, match="too close to 1"):
        oracle_alpha_limit(FIXED, FIXED_T, 1.0, 1.0, 1.0)
    with pytest.raises(RegimeError):
        oracle_alpha_limit(FIXED, FIXED_T, 1.04, 1.0, 1.0)
    oracle_alpha_limit(FIXED, FIXED_T, 0.95, 1.0, 1.0)
    oracle_alpha_limit(FIXED, FIXED_T, 1.05, 1.0, 1.0)


def test_limit_nonpositive_denominator():
    # a target far above the frontier's return makes the quadratic form indefinite
    fr = FrontierParams(0.0, 1.0, 0.0)
    with pytest.raises(NumericalError, match="denominator"):
        oracle_alpha_limit(fr, TargetStats(0.5, 1.0), 0.25, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(
    r=st.floats(-0.5, 0.5), v=st.floats(0.01, 1.0), s=st.floats(0.0, 5.0),
    rb=st.floats(-0.5, 0.5), vb=st.floats(0.01, 2.0), c=st.floats(0.05, 0.9),
    gamma=st.floats(0.2, 10.0),
)
def test_limit_continuous_in_beta(r, v, s, rb, vb, c, gamma):
    fr, ts = FrontierParams(r, v, s), TargetStats(rb, vb)
    try:
        oracle_alpha_limit(fr, ts, c, gamma, 3.0)
    except NumericalError:
        assume(False)
    a1 = oracle_alpha_limit(fr, ts, c, gamma, 3.0)
    a2 = oracle_alpha_limit(fr, ts, c, gamma, 3.0 * (1 + 1e-9))
    assert abs(a1 - a2) <= 1e-6 * max(1.0, abs(a1))


# --- bona_fide_alpha ---------------------------------------------------------


def test_bona_fide_equals_oracle_on_true_inputs():
    est = FrontierParams(0.05, 0.04, 0.25, source="consistent_lt1")
    mode = CalibrationMode("mean_variance", 2.0)
    assert bona_fide_alpha(est, FIXED_T, 0.3, 2.0, mode) == oracle_alpha_limit(
        FIXED, FIXED_T, 0.3, 2.0, 2.0)


def test_bona_fide_regime_mismatch():
    est = FrontierParams(0.05, 0.04, 0.25, source="consistent_lt1")
    with pytest.raises(RegimeError):
        bona_fide_alpha(est, FIXED_T, 2.0, 1.0, CalibrationMode())


def test_bona_fide_sharpe_undefined():
    est = FrontierParams(-0.05, 0.04, 0.25, source="consistent_lt1")
    with pytest.raises(NumericalError, match="estimated Sharpe calibration undefined"):
        bona_fide_alpha(est, FIXED_T, 0.3, 1.0, CalibrationMode("sharpe_ratio"))


def test_bona_fide_clamps_negative_slope():
    est = FrontierParams(0.05, 0.04, -0.1, source="consistent_lt1")
    with pytest.warns(RuntimeWarning, match="clamped"):
        a = bona_fide_alpha(est, FIXED_T, 0.3, 1.0, CalibrationMode())
    assert a == oracle_alpha_limit(FrontierParams(0.05, 0.04, 0.0), FIXED_T, 0.3, 1.0, 1.0)


def test_bona_fide_close_to_limit_small_sample():
    rng = np.random.default_rng(11)
    p, n = 60, 240
    Sigma = random_spd(p, rng, cond=30.0) / 10
    mu = np.linspace(-0.3, 0.3, p)
    b = np.full(p, 1 / p)
    limit = oracle_alpha_limit(true_frontier(mu, Sigma), TargetStats(b @ mu, b @ Sigma @ b),
                               p / n, 1.0, 1.0)
    Y = mu[:, None] + np.linalg.cholesky(Sigma) @ rng.normal(size=(p, n))
    S, ybar = sample_covariance(Y), Y.mean(axis=1)
    est = consistent_frontier_lt1(plugin_frontier(S, ybar), p / n)
    a = bona_fide_alpha(est, target_stats(b, S, ybar), p / n, 1.0, CalibrationMode())
    assert abs(a - limit) < 0.1


# --- gse_weights and resolve_beta --------------------------------------------


def test_gse_endpoints_and_arithmetic():
    w_hat = np.array([0.5, 0.7, -0.2])
    b = np.array([0.2, 0.3, 0.5])
    assert np.array_equal(gse_weights(0.0, w_hat, b).w, b)
    assert np.array_equal(gse_weights(1.0, w_hat, b).w, w_hat)
    g = gse_weights(0.3, w_hat, b, "oracle_shrunk")
    assert np.allclose(g.w, 0.3 * w_hat + 0.7 * b, atol=1e-15)
    assert g.alpha == 0.3 and g.provenance == "oracle_shrunk"


@settings(max_examples=80, deadline=None)
@given(alpha=st.floats(-50, 50), seed=st.integers(0, 2**31 - 1), p=st.integers(1, 20))
def test_gse_preserves_budget(alpha, seed, p):
    rng = np.random.default_rng(seed)
    w = gse_weights(alpha, random_weights(p, rng), random_weights(p, rng))
    assert abs(w.w.sum() - 1.0) <= 1e-10 * max(1.0, np.abs(w.w).sum())


def test_resolve_beta_examples():
    fr = FrontierParams(0.05, 0.04, 0.3)
    assert resolve_beta(CalibrationMode("mean_variance", 2.5), fr) == 2.5
    assert resolve_beta(CalibrationMode("sharpe_ratio"), fr) == pytest.approx(1.25)
    assert resolve_beta(CalibrationMode("min_variance")) == math.inf
    assert resolve_beta(CalibrationMode("min_variance", beta_override=4.0)) == 4.0
    with pytest.raises(ConfigError):
        resolve_beta(CalibrationMode("sharpe_ratio"))


def test_portfolio_weights_budget_check():
    with pytest.raises(ConfigError):
        PortfolioWeights(np.array([0.5, 0.6]), "target")
    with pytest.raises(ConfigError):
        CalibrationMode("mean_variance", gamma=0.0)
    with pytest.raises(ConfigError):
        CalibrationMode("bogus")


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), beta=st.floats(0.05, 50.0))
def test_finite_alpha_maximizer_property(seed, beta):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 8))
    Sigma = random_spd(p, rng, cond=20.0)
    mu = rng.normal(size=p)
    w_hat, b = random_weights(p, rng), random_weights(p, rng)
    a = finite_sample_alpha(w_hat, b, mu, Sigma, beta)
    u = lambda x: shrinkage_objective(x, w_hat, b, mu, Sigma, beta)
    tol = 1e-12 * max(1.0, abs(u(a)))
    assert u(a) >= u(0.0) - tol and u(a) >= u(1.0) - tol
    d = w_hat - b
    assert d @ Sigma @ d > 0
