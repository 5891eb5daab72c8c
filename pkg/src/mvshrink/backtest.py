"""Rolling-window backtests, target portfolios and performance measures.

Conventions used throughout:

* the certainty equivalent is ``mean - (gamma/2) var`` with the 1/n variance;
* VaR is the lower-tail empirical quantile with linear interpolation,
  reported as a return level (negative when it is a loss);
* ES is the mean of the returns at or below VaR;
* trimmed means drop ``trim/2`` of the observations from each tail.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from mvshrink._types import CalibrationMode, PortfolioWeights
from mvshrink.core import moore_penrose_pinv, sample_covariance
from mvshrink.exceptions import ConfigError, DataFormatError, MvShrinkError, NumericalError
from mvshrink.frontier import (
    consistent_frontier_gt1,
    consistent_frontier_lt1,
    gmv_weights,
    plugin_frontier,
    precision_matrix,
    target_stats,
)
from mvshrink.shrinkage import bona_fide_alpha, gse_weights, sample_eu_weights
from mvshrink.validation import check_concentration, check_gamma, check_returns

__all__ = [
    "ReturnPanel",
    "FactorPanel",
    "load_returns_csv",
    "save_returns_csv",
    "load_factors_csv",
    "target_equal_weight",
    "target_equal_correlation",
    "target_fama_french",
    "SeriesMeasures",
    "PerformanceReport",
    "certainty_equivalent",
    "sharpe_ratio",
    "value_at_risk",
    "expected_shortfall",
    "series_measures",
    "aggregate_measures",
    "performance_measures",
    "PairedTest",
    "paired_comparison",
    "BacktestResult",
    "rolling_backtest",
    "resample_assets",
    "TARGETS",
    "STRATEGIES",
]

TARGETS = ("equal_weight", "equal_correlation", "fama_french")
STRATEGIES = ("traditional", "bona_fide", "target")
FACTOR_COLUMNS = ("mkt", "smb", "hml")


# ---------------------------------------------------------------------------
# file formats


@dataclass(frozen=True)
class ReturnPanel:
    """Asset returns in the p x n orientation with their dates and names."""

    returns: NDArray[np.float64]
    dates: tuple
    assets: tuple

    @property
    def shape(self):
        return self.returns.shape


@dataclass(frozen=True)
class FactorPanel:
    """Factor returns, one row per factor, aligned on ``dates``."""

    factors: NDArray[np.float64]
    dates: tuple
    names: tuple = FACTOR_COLUMNS

    def window(self, dates: Sequence) -> NDArray[np.float64]:
        """Columns matching ``dates``; raises if any date is missing."""
        index = {d: i for i, d in enumerate(self.dates)}
        try:
            cols = [index[d] for d in dates]
        except KeyError as exc:
            raise DataFormatError(f"factor file has no row for date {exc.args[0]}") from None
        return self.factors[:, cols]


def _read_table(path, what: str):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"cannot read {what} file {path}: {exc.strerror}") from None
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if len(rows) < 3:
        raise DataFormatError(f"{what} file {path} needs a header and at least 2 data rows")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise DataFormatError(
            f"{what} file {path} needs a date column and at least one value column")
    dates, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataFormatError(
                f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        try:
            d = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise DataFormatError(f"{path}: row {lineno} has invalid date {row[0]!r}") from None
        if dates and d <= dates[-1]:
            kind = "duplicate" if d == dates[-1] else "out-of-order"
            raise DataFormatError(f"{path}: row {lineno} has {kind} date {d.isoformat()}")
        vals = []
        for j, cell in enumerate(row[1:], start=1):
            cell = cell.strip()
            if not cell:
                raise DataFormatError(f"{path}: row {lineno} has a missing value in column "
                                      f"{header[j]!r}")
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: row {lineno} has non-numeric value {cell!r} in column "
                    f"{header[j]!r}") from None
            if not math.isfinite(v):
                raise DataFormatError(f"{path}: row {lineno} has non-finite value {cell!r}")
            vals.append(v)
        dates.append(d)
        values.append(vals)
    return header, tuple(dates), np.asarray(values, dtype=np.float64).T


def load_returns_csv(path) -> ReturnPanel:
    """Read ``date,asset1,...,assetP`` into a p x n panel."""
    header, dates, values = _read_table(path, "returns")
    return ReturnPanel(values, dates, tuple(header[1:]))


def save_returns_csv(path, panel: ReturnPanel) -> None:
    """Write a panel in the format read by :func:`load_returns_csv` (atomically)."""
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *panel.assets])
        for j, d in enumerate(panel.dates):
            writer.writerow([d.isoformat(), *(repr(float(v)) for v in panel.returns[:, j])])
    os.replace(tmp, path)


def load_factors_csv(path) -> FactorPanel:
    """Read ``date,mkt,smb,hml`` factor returns."""
    header, dates, values = _read_table(path, "factor")
    names = tuple(h.lower() for h in header[1:])
    if names != FACTOR_COLUMNS:
        raise DataFormatError(f"factor file must have columns date,mkt,smb,hml; got {header}")
    return FactorPanel(values, dates, names)


# ---------------------------------------------------------------------------
# targets


def target_equal_weight(p: int) -> PortfolioWeights:
    if int(p) < 1:
        raise ConfigError(f"p must be >= 1, got {p}")
    return PortfolioWeights(np.full(int(p), 1.0 / int(p)), "target")


def target_equal_correlation(S: ArrayLike) -> PortfolioWeights:
    """GMV weights of the constant-correlation version of ``S``.

    Variances are kept and every correlation is replaced by the average
    pairwise sample correlation ``r``. The inverse uses the closed form
    ``R^-1 = (I - r/(1+(p-1)r) 11') / (1-r)``.
    """
    S = np.asarray(S, dtype=np.float64)
    p = S.shape[0]
    var = np.diag(S)
    if not np.all(var > 0):
        raise NumericalError("equal-correlation target needs positive variances")
    inv_sd = 1.0 / np.sqrt(var)
    if p == 1:
        return PortfolioWeights(np.ones(1), "target")
    R = S * np.outer(inv_sd, inv_sd)
    r = (R.sum() - np.trace(R)) / (p * (p - 1))
    if not (-1.0 / (p - 1) < r < 1.0):
        raise NumericalError(f"average correlation {r:.4g} gives a singular correlation matrix")
    v = inv_sd
    Rinv_v = (v - r / (1.0 + (p - 1) * r) * v.sum()) / (1.0 - r)
    m1 = inv_sd * Rinv_v
    return PortfolioWeights(m1 / m1.sum(), "target")


def _as_factor_matrix(F, n: int) -> NDArray[np.float64]:
    F = np.asarray(F.factors if isinstance(F, FactorPanel) else F, dtype=np.float64)
    if F.ndim == 1:
        F = F[np.newaxis, :]
    if F.shape[1] != n and F.shape[0] == n:
        F = F.T
    if F.shape[1] != n:
        raise ConfigError(f"factor window has {F.shape[1]} observations, returns have {n}")
    return F


def target_fama_french(Y_window: ArrayLike, F_window) -> PortfolioWeights:
    """GMV weights of the factor-model covariance ``B Sigma_f B' + diag(resid var)``.

    Each asset is regressed on the factors with an intercept; residual and
    factor variances use the 1/n divisor. The inverse is formed with the
    Woodbury identity.
    """
    Y = check_returns(Y_window)
    p, n = Y.shape
    F = _as_factor_matrix(F_window, n)
    k = F.shape[0]
    if n <= k + 1:
        raise ConfigError(f"window length {n} must exceed {k + 1} for a {k}-factor fit")
    Fc = F - F.mean(axis=1, keepdims=True)
    Sigma_f = Fc @ Fc.T / n
    lam = np.linalg.eigvalsh(Sigma_f)
    if lam[0] <= 1e-12 * max(lam[-1], 1e-300):
        raise NumericalError("degenerate factor fit: factor covariance is singular")
    design = np.column_stack([np.ones(n), F.T])
    coef, *_ = np.linalg.lstsq(design, Y.T, rcond=None)
    B = coef[1:].T
    resid = Y.T - design @ coef
    d = (resid**2).sum(axis=0) / n
    if not np.all(d > 1e-14 * max(float(np.max(np.var(Y, axis=1))), 1e-300)):
        raise NumericalError("degenerate factor fit: zero residual variance")
    Dinv_B = B / d[:, None]
    core = np.linalg.inv(Sigma_f) + B.T @ Dinv_B
    Dinv_1 = 1.0 / d
    m1 = Dinv_1 - Dinv_B @ np.linalg.solve(core, B.T @ Dinv_1)
    return PortfolioWeights(m1 / m1.sum(), "target")


# ---------------------------------------------------------------------------
# performance measures


def _series(r) -> NDArray[np.float64]:
    r = np.asarray(r, dtype=np.float64).ravel()
    if r.size == 0 or not np.all(np.isfinite(r)):
        raise ConfigError("return series must be non-empty and finite")
    return r


def certainty_equivalent(r, gamma: float) -> float:
    r = _series(r)
    return float(r.mean() - 0.5 * check_gamma(gamma) * r.var())


def sharpe_ratio(r) -> float:
    r = _series(r)
    sd = float(r.std())
    if not sd > 1e-14 * max(float(np.abs(r).max()), 1e-300):
        raise NumericalError("Sharpe ratio undefined: return series has zero variance")
    return float(r.mean()) / sd


def value_at_risk(r, level: float = 0.95) -> float:
    """Lower ``1 - level`` empirical quantile of the returns."""
    return float(np.quantile(_series(r), 1.0 - level, method="linear"))


def expected_shortfall(r, level: float = 0.95) -> float:
    r = _series(r)
    var = value_at_risk(r, level)
    return float(r[r <= var].mean())


@dataclass(frozen=True)
class SeriesMeasures:
    ce: float
    sr: float
    var95: float
    var99: float
    es95: float
    es99: float


@dataclass(frozen=True)
class PerformanceReport:
    """Performance measures aggregated across one or more return series."""

    ce_mean: float
    ce_median: float
    sr_mean: float
    sr_median: float
    var95: float
    var99: float
    es95: float
    es99: float
    trim_fraction: float = 0.10
    n_series: int = 1

    def as_dict(self) -> dict:
        return asdict(self)


def series_measures(r, gamma: float, *, min_length: int = 20) -> SeriesMeasures:
    r = _series(r)
    if r.size < min_length:
        raise ConfigError(f"return series needs at least {min_length} observations, got {r.size}")
    return SeriesMeasures(
        ce=certainty_equivalent(r, gamma),
        sr=sharpe_ratio(r),
        var95=value_at_risk(r, 0.95),
        var99=value_at_risk(r, 0.99),
        es95=expected_shortfall(r, 0.95),
        es99=expected_shortfall(r, 0.99),
    )


def aggregate_measures(measures: Sequence[SeriesMeasures], trim: float = 0.10) -> PerformanceReport:
    """Trimmed means and medians of CE and SR; plain means of VaR and ES."""
    if not measures:
        raise ConfigError("no series to aggregate")
    if not 0 <= trim < 1:
        raise ConfigError(f"trim must lie in [0, 1), got {trim}")
    ce = np.array([m.ce for m in measures])
    sr = np.array([m.sr for m in measures])

    def col(name):
        return float(np.mean([getattr(m, name) for m in measures]))

    return PerformanceReport(
        ce_mean=float(stats.trim_mean(ce, trim / 2)),
        ce_median=float(np.median(ce)),
        sr_mean=float(stats.trim_mean(sr, trim / 2)),
        sr_median=float(np.median(sr)),
        var95=col("var95"),
        var99=col("var99"),
        es95=col("es95"),
        es99=col("es99"),
        trim_fraction=float(trim),
        n_series=len(measures),
    )


def performance_measures(r, gamma: float, trim: float = 0.10) -> PerformanceReport:
    """Performance report of one series (1-D) or of several (rows of a 2-D array).

    NaN entries mark days without a portfolio and are dropped per series.
    """
    arr = np.asarray(r, dtype=np.float64)
    rows = [arr] if arr.ndim == 1 else list(arr)
    return aggregate_measures([series_measures(x[np.isfinite(x)], gamma) for x in rows], trim)


@dataclass(frozen=True)
class PairedTest:
    t_stat: float
    p_value: float
    significant: bool
    n: int


def paired_comparison(a, b, *, level: float = 0.05) -> PairedTest:
    """Paired t statistic with a two-sided normal-approximation p-value."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ConfigError("paired samples must have equal lengths")
    if a.size < 10:
        raise ConfigError(f"paired comparison needs at least 10 pairs, got {a.size}")
    d = a - b
    sd = float(d.std(ddof=1))
    if d.size and np.all(d == d[0]) and d[0] == 0.0:
        return PairedTest(0.0, 1.0, False, int(d.size))
    if not sd > 1e-14 * max(float(np.abs(d).max()), 1e-300):
        raise NumericalError("paired comparison undefined: differences have zero variance")
    t = float(d.mean()) / (sd / math.sqrt(d.size))
    pval = float(2.0 * stats.norm.sf(abs(t)))
    return PairedTest(t, pval, pval < level, int(d.size))


# ---------------------------------------------------------------------------
# rolling backtest


@dataclass
class BacktestResult:
    """Per-strategy realized returns (NaN on gap days) and the weights used."""

    dates: tuple
    returns: dict
    weights: dict
    alphas: NDArray[np.float64]
    c_hat: float
    window: int
    gaps: list = field(default_factory=list)


def _target(name, p, S, Yw, factors, dates_w):
    if not isinstance(name, str):
        return PortfolioWeights(np.asarray(name, dtype=np.float64), "target")
    if name == "equal_weight":
        return target_equal_weight(p)
    if name == "equal_correlation":
        return target_equal_correlation(S)
    if name == "fama_french":
        if factors is None:
            raise ConfigError("the fama_french target needs a factor file")
        F = factors.window(dates_w) if isinstance(factors, FactorPanel) else factors
        return target_fama_french(Yw, F)
    raise ConfigError(f"unknown target {name!r}; choose from {TARGETS}")


def rolling_backtest(
    Y: ArrayLike,
    dates: Sequence | None = None,
    *,
    window: int,
    eval_days: int = 200,
    mode: CalibrationMode | str = "mean_variance",
    gamma: float = 1.0,
    target="equal_weight",
    factors: FactorPanel | ArrayLike | None = None,
    strategies: Sequence[str] = STRATEGIES,
) -> BacktestResult:
    """Re-estimate on the trailing ``window`` days and hold for one day.

    The last ``eval_days`` observations are evaluation days; the portfolio
    for day ``t`` uses observations ``t - window .. t - 1`` only. Strategy
    failures on a given day (for example an undefined Sharpe calibration)
    leave a NaN and are listed in ``gaps``.
    """
    Y = check_returns(Y)
    p, total = Y.shape
    window, eval_days = int(window), int(eval_days)
    dates = tuple(range(total)) if dates is None else tuple(dates)
    if len(dates) != total:
        raise ConfigError("dates and returns disagree in length")
    if window < 2 or eval_days < 1:
        raise ConfigError("window must be >= 2 and eval_days >= 1")
    if window + eval_days > total:
        raise ConfigError(f"window {window} + eval_days {eval_days} exceeds the {total} "
                          f"observations available; estimation would overlap evaluation")
    unknown = set(strategies) - set(STRATEGIES)
    if unknown:
        raise ConfigError(f"unknown strategies {sorted(unknown)}")
    if isinstance(mode, str):
        mode = CalibrationMode(mode, gamma)
    gamma = check_gamma(gamma)
    c_hat = check_concentration(p / window)

    first = total - eval_days
    ret = {s: np.full(eval_days, np.nan) for s in strategies}
    wts = {s: np.full((eval_days, p), np.nan) for s in strategies}
    alphas = np.full(eval_days, np.nan)
    gaps = []
    for i, t in enumerate(range(first, total)):
        Yw = Y[:, t - window:t]
        S = sample_covariance(Yw)
        ybar = Yw.mean(axis=1)
        todays = {}
        try:
            if c_hat < 1:
                w_trad = sample_eu_weights(precision_matrix(S, what="S"), ybar, gamma)
                front = consistent_frontier_lt1(plugin_frontier(S, ybar), c_hat)
            else:
                S_plus = moore_penrose_pinv(S)
                w_trad = sample_eu_weights(S_plus, ybar, gamma, "traditional_pinv")
                front = consistent_frontier_gt1(S_plus, ybar, c_hat)
            todays["traditional"] = w_trad
        except MvShrinkError as exc:
            w_trad = front = None
            gaps.append({"date": str(dates[t]), "strategy": "traditional", "error": exc.name,
                         "message": str(exc)})
        try:
            b = _target(target, p, S, Yw, factors, dates[t - window:t])
            todays["target"] = b
        except ConfigError:
            raise
        except MvShrinkError as exc:
            b = None
            gaps.append({"date": str(dates[t]), "strategy": "target", "error": exc.name,
                         "message": str(exc)})
        if "bona_fide" in strategies and w_trad is not None and b is not None:
            try:
                a = bona_fide_alpha(front, target_stats(b, S, ybar), c_hat, gamma, mode)
                todays["bona_fide"] = gse_weights(a, w_trad, b)
                alphas[i] = a
            except MvShrinkError as exc:
                gaps.append({"date": str(dates[t]), "strategy": "bona_fide", "error": exc.name,
                             "message": str(exc)})
        for s in strategies:
            if s in todays:
                w = todays[s].w
                wts[s][i] = w
                ret[s][i] = float(w @ Y[:, t])
    return BacktestResult(dates[first:], ret, wts, alphas, c_hat, window, gaps)


def resample_assets(n_total: int, subset: int, count: int, seed: int) -> list[NDArray[np.int64]]:
    """Random asset subsets, one independent stream per draw."""
    if not 1 <= subset <= n_total:
        raise ConfigError(f"subset size {subset} must lie in [1, {n_total}]")
    out = []
    for k in range(int(count)):
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(k),)))
        out.append(np.sort(rng.choice(n_total, size=int(subset), replace=False)))
    return out
