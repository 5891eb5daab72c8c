import math
import time

import numpy as np
import pytest

from mvshrink.core import moore_penrose_pinv
from mvshrink.exceptions import ConfigError, RegimeError
from mvshrink.simulate import (
    DEFAULT_C_GRID,
    EXPERIMENT_HEADER,
    DgpSpec,
    LossExperimentConfig,
    RmtProbes,
    SpectrumSpec,
    generate_returns,
    make_covariance,
    make_innovations,
    make_means,
    make_spectrum,
    rmt_quantities,
    run_loss_experiment,
    verify_rmt_limits,
)


# --- spectrum, means, returns -----------------------------------------------


def test_two_point_spectrum():
    Sigma = make_covariance(SpectrumSpec(2, condition_index=4, rotation="diagonal"))
    assert np.allclose(Sigma, np.diag([0.1, 0.4]), atol=1e-15)


def test_flat_spectrum():
    Sigma = make_covariance(SpectrumSpec(5, condition_index=1, rotation="diagonal"))
    assert np.allclose(Sigma, 0.1 * np.eye(5), atol=1e-15)


def test_spectrum_grid_and_condition_number():
    lam = make_spectrum(40, 1000.0)
    assert lam[-1] / lam[0] == pytest.approx(1000.0, rel=1e-12)
    ratios = lam[1:] / lam[:-1]
    assert np.allclose(ratios, ratios[0], rtol=1e-10)


def test_rotated_spectrum_matches_diagonal():
    rot = make_covariance(SpectrumSpec(50, condition_index=1000, seed=4))
    diag = make_covariance(SpectrumSpec(50, condition_index=1000, rotation="diagonal"))
    assert np.allclose(np.linalg.eigvalsh(rot), np.diag(diag), rtol=1e-8)
    assert np.linalg.cond(rot) == pytest.approx(1000.0, rel=1e-8)
    assert not np.allclose(rot, np.diag(np.diag(rot)))


def test_spectrum_spec_validation():
    with pytest.raises(ConfigError):
        SpectrumSpec(3, condition_index=0.5)
    with pytest.raises(ConfigError):
        SpectrumSpec(3, rotation="haar")
    with pytest.raises(ConfigError):
        DgpSpec(10, distribution="student_t", df=4.0)


def test_means_grid():
    assert np.allclose(make_means(3), [-0.3, 0.0, 0.3], atol=1e-15)
    assert np.array_equal(make_means(1), [0.0])
    m = make_means(7)
    assert np.all(np.diff(m) > 0) and m[0] == -0.3 and m[-1] == 0.3


def test_zero_covariance_returns_mean():
    mu = np.array([0.1, -0.2, 0.3])
    Y = generate_returns(mu, np.zeros((3, 3)), DgpSpec(20, seed=1))
    assert np.allclose(Y, mu[:, None], atol=0)


def test_gaussian_sample_mean_clt_band():
    mu = np.array([0.1, -0.2, 0.3])
    Sigma = np.diag([1.0, 4.0, 0.25])
    n = 50_000
    Y = generate_returns(mu, Sigma, DgpSpec(n, seed=2))
    band = 4 * np.sqrt(np.diag(Sigma) / n)
    assert np.all(np.abs(Y.mean(axis=1) - mu) <= band)


def test_student_t_unit_variance():
    X = make_innovations(1000, 1000, DgpSpec(1000, distribution="student_t", df=5.0),
                         np.random.default_rng(3))
    assert X.var() == pytest.approx(1.0, rel=0.02)
    # heavier tails than the normal: excess kurtosis of t(5) is 6
    assert ((X - X.mean()) ** 4).mean() / X.var() ** 2 > 4.5


def test_generate_returns_deterministic():
    Sigma = make_covariance(SpectrumSpec(6, seed=1))
    a = generate_returns(np.zeros(6), Sigma, DgpSpec(30, seed=9))
    b = generate_returns(np.zeros(6), Sigma, DgpSpec(30, seed=9))
    c = generate_returns(np.zeros(6), Sigma, DgpSpec(30, seed=10))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_generate_returns_uses_square_root(rng):
    Sigma = make_covariance(SpectrumSpec(5, seed=1))
    Y, X = generate_returns(np.ones(5), Sigma, DgpSpec(40, seed=4), return_innovations=True)
    w, U = np.linalg.eigh(Sigma)
    root = (U * np.sqrt(w)) @ U.T
    assert np.allclose(Y, 1.0 + root @ X, atol=1e-12)


# --- random-matrix limits ----------------------------------------------------


def test_probes_unit_norm():
    probes = RmtProbes.default(9)
    for v in (probes.xi, probes.theta, probes.eta):
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ConfigError):
        RmtProbes(np.ones(3), np.ones(3), np.ones(3)).check(3)


def test_exact_identity_at_any_size():
    for p, n in [(30, 10), (300, 120), (1000, 500)]:
        rows = verify_rmt_limits(p, n, seed=p)
        exact = [r for r in rows if r.kind == "exact"]
        assert len(exact) == 1 and exact[0].gap <= 1e-8 and exact[0].passed


def test_rmt_quantities_against_direct_pinv():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((60, 25))
    rows = {q: v for _, q, v, _, _ in rmt_quantities(X, RmtProbes.default(60))}
    xbar = X.mean(axis=1)
    V_plus = moore_penrose_pinv(X @ X.T / 25 - np.outer(xbar, xbar))
    assert rows["xbar'V^+ xbar"] == pytest.approx(xbar @ V_plus @ xbar, rel=1e-8)
    Vt_plus = np.linalg.pinv(X @ X.T / 25)
    four = xbar @ np.linalg.matrix_power(Vt_plus, 4) @ xbar
    assert rows["xbar'(Vt^+)^4 xbar"] == pytest.approx(four, rel=1e-8)


def test_rmt_first_order_limits_small_sizes():
    rows = verify_rmt_limits(500, 1000, n_seeds=3, seed=1)
    by_name = {r.quantity: r for r in rows}
    assert abs(by_name["xbar'V^-1 xbar"].empirical - 1.0) < 0.05
    rows = verify_rmt_limits(1000, 500, n_seeds=3, seed=1)
    by_name = {r.quantity: r for r in rows}
    assert abs(by_name["xbar'(Vt^+)^4 xbar"].empirical - 6.0) < 0.6


def test_rmt_gmv_precision_row():
    Sigma = make_covariance(SpectrumSpec(100, condition_index=150, seed=2))
    rows = verify_rmt_limits(100, 300, Sigma, n_seeds=10, seed=2)
    row = [r for r in rows if r.lemma == "gmv_precision"][0]
    assert row.limit == pytest.approx(1.5) and row.passed


def test_rmt_guard_band():
    with pytest.raises(RegimeError):
        verify_rmt_limits(100, 101)


@pytest.mark.parametrize("p,n", [(50, 100), (100, 50)])
def test_rmt_gaps_shrink_when_doubling(p, n):
    # per row: median absolute gap over many draws, so the comparison is not swamped by noise
    small = verify_rmt_limits(p, n, n_seeds=200, seed=0)
    large = verify_rmt_limits(2 * p, 2 * n, n_seeds=200, seed=0)
    for a, b in zip(small, large):
        if a.kind != "exact":
            assert b.median_abs_gap < a.median_abs_gap, a.quantity
    # over all rows with 20 draws per size
    total = lambda rows: sum(r.median_abs_gap / max(abs(r.limit), 1.0) for r in rows
                             if r.kind != "exact")
    assert total(verify_rmt_limits(2 * p, 2 * n, n_seeds=20)) < total(
        verify_rmt_limits(p, n, n_seeds=20))


def test_rmt_threads_do_not_change_results():
    a = verify_rmt_limits(80, 40, n_seeds=4, seed=5, threads=1)
    b = verify_rmt_limits(80, 40, n_seeds=4, seed=5, threads=3)
    assert [r.as_dict() for r in a] == [r.as_dict() for r in b]


# --- loss experiment ---------------------------------------------------------


def test_default_grid_avoids_guard_band():
    assert all(abs(c - 1) >= 0.05 for c in DEFAULT_C_GRID)
    assert DEFAULT_C_GRID[0] == 0.1 and DEFAULT_C_GRID[-1] == 3.0


def test_experiment_rejects_guard_band():
    with pytest.raises(RegimeError):
        LossExperimentConfig(c_grid=(0.5, 0.97))
    with pytest.raises(ConfigError):
        LossExperimentConfig(replications=0)
    with pytest.raises(ConfigError):
        LossExperimentConfig(modes=("nope",))


def test_experiment_bit_identical():
    cfg = dict(c_grid=(0.5, 2.0), p_grid=(20,), replications=1, seed=3)
    a = run_loss_experiment(LossExperimentConfig(**cfg)).to_csv()
    b = run_loss_experiment(LossExperimentConfig(**cfg)).to_csv()
    assert a == b
    assert a.splitlines()[0] == ",".join(EXPERIMENT_HEADER)


def test_experiment_threads_do_not_change_results():
    cfg = dict(c_grid=(0.5,), p_grid=(20,), replications=6, seed=1)
    a = run_loss_experiment(LossExperimentConfig(**cfg)).to_csv()
    b = run_loss_experiment(LossExperimentConfig(threads=3, **cfg)).to_csv()
    assert a == b


def test_experiment_table_contents():
    table = run_loss_experiment(LossExperimentConfig(c_grid=(0.5,), p_grid=(30,),
                                                     replications=5, seed=2))
    stats = {(r["strategy"], r["stat"]) for r in table.rows}
    for strat in ("traditional", "oracle_shrunk", "bona_fide", "target"):
        assert (strat, "loss_mean") in stats and (strat, "loss_median") in stats
    assert ("oracle_shrunk", "alpha_mean") in stats and ("bona_fide", "alpha_median") in stats
    assert ("theory", "loss_shrunk") in stats
    assert table.value(0.5, 30, "mean_variance", "all", "failures") == 0.0
    # the target portfolio is fixed, so every replication has the same loss
    assert table.value(0.5, 30, "mean_variance", "target", "loss_mean") == pytest.approx(
        table.value(0.5, 30, "mean_variance", "theory", "loss_target"), rel=1e-12)


def test_experiment_flags_failed_cells():
    # with mu entirely negative the population GMV return is negative, so the
    # Sharpe-ratio calibration is undefined; the sweep records the cell and continues.
    # A small gamma keeps the optimal utility positive for the other mode.
    table = run_loss_experiment(LossExperimentConfig(
        c_grid=(0.5,), p_grid=(10,), modes=("sharpe_ratio", "mean_variance"),
        replications=2, mu_range=(-0.3, -0.1), gamma=0.05))
    assert math.isnan(table.value(0.5, 10, "sharpe_ratio", "all", "error"))
    assert [e["mode"] for e in table.metadata["errors"]] == ["sharpe_ratio"]
    table.value(0.5, 10, "mean_variance", "traditional", "loss_mean")


@pytest.mark.slow
def test_experiment_qualitative_ordering():
    cfg = LossExperimentConfig(c_grid=(0.4, 0.5, 0.8, 0.9), p_grid=(100,), replications=40,
                               condition_index=1000, seed=0)
    t0 = time.perf_counter()
    table = run_loss_experiment(cfg)
    assert time.perf_counter() - t0 < 120
    v = lambda c, s, stat="loss_mean": table.value(c, 100, "mean_variance", s, stat)
    assert v(0.9, "oracle_shrunk", "alpha_mean") < v(0.5, "oracle_shrunk", "alpha_mean")
    assert v(0.8, "bona_fide") < v(0.8, "traditional")
    for c in (0.4, 0.5, 0.8, 0.9):
        assert v(c, "oracle_shrunk") <= v(c, "target")
        assert v(c, "oracle_shrunk") <= v(c, "traditional")
