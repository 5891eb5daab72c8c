"""Synthetic data, loss-curve experiments and random-matrix limit checks.

Every replication draws from its own stream seeded by
``SeedSequence(seed, spawn_key=(...))`` so results do not depend on how work
is scheduled across threads.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mvshrink._types import Calibration, CalibrationMode, TargetStats
from mvshrink.core import (
    generalized_inverse_oracle,
    moore_penrose_pinv,
    rank_one_pinv_update,
    sample_covariance,
    sqrtm_psd,
)
from mvshrink.exceptions import ConfigError, MvShrinkError, RegimeError
from mvshrink.frontier import (
    consistent_frontier_gt1,
    consistent_frontier_lt1,
    plugin_frontier,
    precision_matrix,
    target_stats,
    true_frontier,
)
from mvshrink.loss import optimal_utility, relative_loss_gse, relative_loss_gse_limit
from mvshrink.loss import relative_loss_target, relative_loss_traditional, utility
from mvshrink.shrinkage import (
    bona_fide_alpha,
    finite_sample_alpha,
    gse_weights,
    oracle_alpha_limit,
    resolve_beta,
    sample_eu_weights,
)
from mvshrink.validation import check_symmetric, check_vector, in_guard_band

__all__ = [
    "SpectrumSpec",
    "DgpSpec",
    "make_spectrum",
    "make_covariance",
    "make_means",
    "make_innovations",
    "generate_returns",
    "RmtProbes",
    "RmtRow",
    "rmt_quantities",
    "verify_rmt_limits",
    "LossExperimentConfig",
    "ExperimentTable",
    "run_loss_experiment",
    "DEFAULT_C_GRID",
    "EXPERIMENT_HEADER",
]

#: c grid used when none is given: 0.1..0.9 and 1.1..3.0 in steps of 0.1.
DEFAULT_C_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10)) + tuple(
    round(0.1 * k, 1) for k in range(11, 31)
)
EXPERIMENT_HEADER = ("c", "p", "mode", "strategy", "stat", "value", "replications", "seed")
STRATEGIES = ("traditional", "oracle_shrunk", "bona_fide", "target")


def _rng(seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


# ---------------------------------------------------------------------------
# data-generating process


@dataclass(frozen=True)
class SpectrumSpec:
    """Exponential eigenvalue grid with a prescribed condition index.

    Parameters
    ----------
    p : int
        Dimension.
    condition_index : float
        Ratio of the largest to the smallest eigenvalue.
    lambda_min : float
        Smallest eigenvalue.
    rotation : {"random_orthogonal", "diagonal"}
        Eigenvector structure. The random rotation is seeded by ``seed``.
    seed : int
    """

    p: int
    condition_index: float = 150.0
    lambda_min: float = 0.1
    rotation: str = "random_orthogonal"
    seed: int = 0

    def __post_init__(self):
        if int(self.p) < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if not self.condition_index >= 1:
            raise ConfigError(f"condition_index must be >= 1, got {self.condition_index}")
        if not self.lambda_min > 0:
            raise ConfigError(f"lambda_min must be positive, got {self.lambda_min}")
        if self.rotation not in ("random_orthogonal", "diagonal"):
            raise ConfigError(f"unknown rotation {self.rotation!r}")


@dataclass(frozen=True)
class DgpSpec:
    """Sampling distribution of the standardized innovations.

    ``distribution`` is ``"gaussian"`` or ``"student_t"``; Student-t draws
    are rescaled to unit variance, which needs ``df > 4`` for the finite
    fourth moment the asymptotics rely on.
    """

    n: int
    mu_range: tuple[float, float] = (-0.3, 0.3)
    distribution: str = "gaussian"
    df: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.distribution not in ("gaussian", "student_t"):
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "student_t" and not self.df > 4:
            raise ConfigError(f"student_t needs df > 4, got {self.df}")
        lo, hi = self.mu_range
        if not lo <= hi:
            raise ConfigError("mu_range must be (low, high) with low <= high")


def make_spectrum(p: int, condition_index: float, lambda_min: float = 0.1) -> NDArray[np.float64]:
    """``lambda_min * exp(log(condition_index) * (i-1)/(p-1))`` for i = 1..p."""
    if p == 1:
        return np.array([float(lambda_min)])
    grid = np.arange(p) / (p - 1)
    lam = lambda_min * np.exp(math.log(condition_index) * grid)
    lam[-1] = lambda_min * condition_index
    return lam


def _random_orthogonal(p: int, rng: np.random.Generator) -> NDArray[np.float64]:
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    # sign fix makes the draw Haar-distributed
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def make_covariance(spec: SpectrumSpec) -> NDArray[np.float64]:
    """Covariance matrix with the spectrum of ``spec``."""
    lam = make_spectrum(int(spec.p), spec.condition_index, spec.lambda_min)
    if spec.rotation == "diagonal":
        return np.diag(lam)
    Q = _random_orthogonal(int(spec.p), _rng(spec.seed))
    Sigma = (Q * lam) @ Q.T
    return 0.5 * (Sigma + Sigma.T)


def make_means(p: int, range: tuple[float, float] = (-0.3, 0.3)) -> NDArray[np.float64]:
    """Expected returns equally spaced on ``range``; the midpoint when p = 1."""
    lo, hi = map(float, range)
    if p < 1:
        raise ConfigError(f"p must be >= 1, got {p}")
    if p == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, p)


def make_innovations(p: int, n: int, dgp: DgpSpec, rng: np.random.Generator) -> NDArray[np.float64]:
    """p x n matrix of i.i.d. zero-mean unit-variance draws."""
    if dgp.distribution == "gaussian":
        return rng.standard_normal((p, n))
    return rng.standard_t(dgp.df, size=(p, n)) / math.sqrt(dgp.df / (dgp.df - 2.0))


def generate_returns(
    mu: ArrayLike,
    Sigma: ArrayLike,
    dgp: DgpSpec,
    *,
    rng: np.random.Generator | None = None,
    return_innovations: bool = False,
):
    """Draw ``Y = mu 1' + Sigma^{1/2} X`` with ``n = dgp.n`` columns.

    Uses ``dgp.seed`` unless a generator is passed. With
    ``return_innovations=True`` the standardized matrix ``X`` is returned too.
    """
    Sigma = check_symmetric(Sigma, name="Sigma", psd=True)
    mu = check_vector(mu, Sigma.shape[0], "mu")
    rng = _rng(dgp.seed) if rng is None else rng
    X = make_innovations(mu.shape[0], int(dgp.n), dgp, rng)
    Y = mu[:, None] + sqrtm_psd(Sigma) @ X
    return (Y, X) if return_innovations else Y


# ---------------------------------------------------------------------------
# random-matrix limits


@dataclass(frozen=True)
class RmtProbes:
    """Unit-norm nonrandom vectors used in the bilinear forms."""

    xi: NDArray[np.float64]
    theta: NDArray[np.float64]
    eta: NDArray[np.float64]

    @classmethod
    def default(cls, p: int) -> "RmtProbes":
        theta = np.full(p, 1.0 / math.sqrt(p))
        u = np.where(np.arange(p) % 2 == 0, 1.0, -1.0) / math.sqrt(p)
        eta = theta + u
        if not np.any(eta):
            eta = theta.copy()
        return cls(xi=theta.copy(), theta=theta, eta=eta / np.linalg.norm(eta))

    def check(self, p: int) -> "RmtProbes":
        for name in ("xi", "theta", "eta"):
            v = check_vector(getattr(self, name), p, name)
            if abs(np.linalg.norm(v) - 1.0) > 1e-8:
                raise ConfigError(f"probe {name} must have unit Euclidean norm")
        return self


@dataclass(frozen=True)
class RmtRow:
    lemma: str
    quantity: str
    empirical: float
    limit: float
    gap: float
    kind: str  # "relative", "zero" or "exact"
    tolerance: float
    passed: bool
    median_abs_gap: float = float("nan")
    std_error: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)


def _power_forms(apply: Callable, x, theta, xi, k_max: int):
    """Return lists of x'A^k x, x'A^k theta and xi'A^k theta for k = 1..k_max."""
    out_xx, out_xt, out_ft = [], [], []
    ax, at = x, theta
    for _ in range(k_max):
        ax, at = apply(ax), apply(at)
        out_xx.append(float(x @ ax))
        out_xt.append(float(x @ at))
        out_ft.append(float(xi @ at))
    return out_xx, out_xt, out_ft


def rmt_quantities(X: ArrayLike, probes: RmtProbes, Sigma: ArrayLike | None = None) -> list[tuple]:
    """Bilinear forms of (pseudo-)inverses of ``XX'/n`` and its centred version.

    Returns tuples ``(lemma, quantity, value, limit, kind)``. The regime is
    taken from ``p/n`` of ``X``. With ``Sigma`` an extra row compares the
    sample and population GMV precisions ``1'S^-1 1 / 1'Sigma^-1 1``.
    """
    X = np.asarray(X, dtype=np.float64)
    p, n = X.shape
    c = p / n
    if in_guard_band(c):
        raise RegimeError(f"concentration too close to 1 (c={c:.4g})")
    xi, th, eta = probes.xi, probes.theta, probes.eta
    ft = float(xi @ th)
    ft_proj = ft - float(xi @ eta) * float(eta @ th) / float(eta @ eta)
    xbar = X.mean(axis=1)
    Vt = X @ X.T / n
    Vt = 0.5 * (Vt + Vt.T)
    rows = []
    if c < 1:
        Vt_inv = precision_matrix(Vt, what="XX'/n")
        V = Vt - np.outer(xbar, xbar)
        V_inv = precision_matrix(V, what="centred XX'/n")
        xx, xt, ftv = _power_forms(lambda v: Vt_inv @ v, xbar, th, xi, 2)
        k1, k3 = 1.0 / (1.0 - c), 1.0 / (1.0 - c) ** 3
        rows += [
            ("inverse", "xi'Vt^-1 theta", ftv[0], k1 * ft, "relative"),
            ("inverse", "xbar'Vt^-1 xbar", xx[0], c, "relative"),
            ("inverse", "xbar'Vt^-1 theta", xt[0], 0.0, "zero"),
            ("inverse", "xi'Vt^-2 theta", ftv[1], k3 * ft, "relative"),
            ("inverse", "xbar'Vt^-2 xbar", xx[1], c / (1.0 - c), "relative"),
            ("inverse", "xbar'Vt^-2 theta", xt[1], 0.0, "zero"),
        ]
        xx, xt, ftv = _power_forms(lambda v: V_inv @ v, xbar, th, xi, 2)
        rows += [
            ("centred_inverse", "xi'V^-1 theta", ftv[0], k1 * ft, "relative"),
            ("centred_inverse", "xbar'V^-1 xbar", xx[0], c / (1.0 - c), "relative"),
            ("centred_inverse", "xbar'V^-1 theta", xt[0], 0.0, "zero"),
            ("centred_inverse", "xi'V^-2 theta", ftv[1], k3 * ft, "relative"),
            ("centred_inverse", "xbar'V^-2 xbar", xx[1], c / (1.0 - c) ** 3, "relative"),
            ("centred_inverse", "xbar'V^-2 theta", xt[1], 0.0, "zero"),
        ]
        Ve = V_inv @ eta
        P = V_inv - np.outer(Ve, Ve) / float(eta @ Ve)
        xx, xt, ftv = _power_forms(lambda v: P @ v, xbar, th, xi, 2)
        rows += [
            ("projected_inverse", "xi'P theta", ftv[0], k1 * ft_proj, "relative"),
            ("projected_inverse", "xbar'P xbar", xx[0], c / (1.0 - c), "relative"),
            ("projected_inverse", "xbar'P theta", xt[0], 0.0, "zero"),
            ("projected_inverse", "xi'P^2 theta", ftv[1], k3 * ft_proj, "relative"),
            ("projected_inverse", "xbar'P^2 xbar", xx[1], c / (1.0 - c) ** 3, "relative"),
            ("projected_inverse", "xbar'P^2 theta", xt[1], 0.0, "zero"),
        ]
        gmv_factor, S_inv_like = k1, V_inv
    else:
        Vt_plus = moore_penrose_pinv(Vt)
        V_plus = rank_one_pinv_update(Vt_plus, xbar)
        xx, xt, ftv = _power_forms(lambda v: Vt_plus @ v, xbar, th, xi, 4)
        k1, k3 = 1.0 / (c * (c - 1.0)), 1.0 / (c - 1.0) ** 3
        rows += [
            ("pseudo_inverse", "xi'Vt^+ theta", ftv[0], k1 * ft, "relative"),
            ("pseudo_inverse", "xi'(Vt^+)^2 theta", ftv[1], k3 * ft, "relative"),
            ("pseudo_inverse", "xbar'Vt^+ xbar", xx[0], 1.0, "exact"),
            ("pseudo_inverse", "xbar'(Vt^+)^2 xbar", xx[1], 1.0 / (c - 1.0), "relative"),
            ("pseudo_inverse", "xbar'(Vt^+)^3 xbar", xx[2], c / (c - 1.0) ** 3, "relative"),
            ("pseudo_inverse", "xbar'(Vt^+)^4 xbar", xx[3], c * (c + 1.0) / (c - 1.0) ** 5,
             "relative"),
            ("pseudo_inverse", "xbar'Vt^+ theta", xt[0], 0.0, "zero"),
            ("pseudo_inverse", "xbar'(Vt^+)^2 theta", xt[1], 0.0, "zero"),
            ("pseudo_inverse", "xbar'(Vt^+)^3 theta", xt[2], 0.0, "zero"),
        ]
        xx, xt, ftv = _power_forms(lambda v: V_plus @ v, xbar, th, xi, 2)
        rows += [
            ("centred_pseudo_inverse", "xi'V^+ theta", ftv[0], k1 * ft, "relative"),
            ("centred_pseudo_inverse", "xbar'V^+ xbar", xx[0], 1.0 / (c - 1.0), "relative"),
            ("centred_pseudo_inverse", "xbar'V^+ theta", xt[0], 0.0, "zero"),
            ("centred_pseudo_inverse", "xi'(V^+)^2 theta", ftv[1], k3 * ft, "relative"),
            ("centred_pseudo_inverse", "xbar'(V^+)^2 xbar", xx[1], c / (c - 1.0) ** 3,
             "relative"),
            ("centred_pseudo_inverse", "xbar'(V^+)^2 theta", xt[1], 0.0, "zero"),
        ]
        Ve = V_plus @ eta
        P = V_plus - np.outer(Ve, Ve) / float(eta @ Ve)
        xx, xt, ftv = _power_forms(lambda v: P @ v, xbar, th, xi, 2)
        rows += [
            ("projected_pseudo_inverse", "xi'P^+ theta", ftv[0], k1 * ft_proj, "relative"),
            ("projected_pseudo_inverse", "xbar'P^+ xbar", xx[0], 1.0 / (c - 1.0), "relative"),
            ("projected_pseudo_inverse", "xbar'P^+ theta", xt[0], 0.0, "zero"),
            ("projected_pseudo_inverse", "xi'(P^+)^2 theta", ftv[1], k3 * ft_proj, "relative"),
            ("projected_pseudo_inverse", "xbar'(P^+)^2 xbar", xx[1], c / (c - 1.0) ** 3,
             "relative"),
            ("projected_pseudo_inverse", "xbar'(P^+)^2 theta", xt[1], 0.0, "zero"),
        ]
        gmv_factor, S_inv_like = k1, V_plus
    if Sigma is not None:
        # 1'S^* 1 = zeta' V^-1 zeta with zeta = Sigma^{-1/2} 1
        zeta = sqrtm_psd(Sigma, inverse=True).sum(axis=1)
        ratio = float(zeta @ S_inv_like @ zeta) / float(zeta @ zeta)
        rows.append(("gmv_precision", "1'S^*1 / 1'Sigma^-1 1", ratio, gmv_factor, "relative"))
    return rows


def verify_rmt_limits(
    p: int,
    n: int,
    Sigma: ArrayLike | None = None,
    probes: RmtProbes | None = None,
    seed: int = 0,
    *,
    n_seeds: int = 1,
    distribution: str = "gaussian",
    df: float = 5.0,
    rel_tol: float = 0.07,
    abs_tol: float = 0.02,
    exact_tol: float = 1e-8,
    se_multiplier: float | None = None,
    threads: int = 1,
) -> list[RmtRow]:
    """Compare empirical bilinear forms with their almost-sure limits.

    Each quantity is evaluated on ``n_seeds`` independent draws. Limit rows
    use the median empirical value; the exact-identity row uses the draw
    furthest from its target. Relative rows pass when the gap is within
    ``rel_tol * |limit|``, zero-limit rows when it is within ``abs_tol``.

    With ``se_multiplier`` set, a limit row also passes when its gap is
    within that many standard errors of the median (estimated from the
    spread across draws). This widens the band for slowly converging
    quantities whose finite-size spread exceeds the fixed tolerance.
    """
    p, n = int(p), int(n)
    if p < 2 or n < 2:
        raise ConfigError("p and n must both be at least 2")
    if in_guard_band(p / n):
        raise RegimeError(f"concentration too close to 1 (c={p / n:.4g})")
    probes = (probes or RmtProbes.default(p)).check(p)
    dgp = DgpSpec(n=n, distribution=distribution, df=df)
    if Sigma is not None:
        Sigma = check_symmetric(Sigma, name="Sigma", psd=True)

    def one(k: int):
        X = make_innovations(p, n, dgp, _rng(seed, k))
        return rmt_quantities(X, probes, Sigma)

    runs = _map(one, range(int(n_seeds)), threads)
    out = []
    for j, (lemma, name, _, limit, kind) in enumerate(runs[0]):
        vals = np.array([run[j][2] for run in runs])
        gaps = np.abs(vals - limit)
        # asymptotic standard error of a sample median under normality
        se = 1.2533 * float(vals.std(ddof=1)) / math.sqrt(len(vals)) if len(vals) > 1 else math.nan
        if kind == "exact":
            emp = float(vals[np.argmax(gaps)])
            tol = exact_tol
        else:
            emp = float(np.median(vals))
            tol = abs_tol if kind == "zero" else rel_tol * abs(limit)
            if se_multiplier is not None and math.isfinite(se):
                tol = max(tol, se_multiplier * se)
        gap = abs(emp - limit)
        out.append(RmtRow(lemma, name, emp, float(limit), gap, kind, tol, bool(gap <= tol),
                          float(np.median(gaps)), se))
    return out


def _map(fn, items: Iterable, threads: int) -> list:
    items = list(items)
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# loss-curve experiment


@dataclass
class LossExperimentConfig:
    """Settings of a relative-loss sweep over concentration ratios.

    ``n`` is ``round(p / c)`` for each cell. Sharpe-ratio calibration uses
    the population beta, as in a controlled simulation the truth is known.
    """

    c_grid: Sequence[float] = DEFAULT_C_GRID
    p_grid: Sequence[int] = (100,)
    condition_index: float = 1000.0
    modes: Sequence[str] = ("mean_variance",)
    replications: int = 100
    seed: int = 0
    gamma: float = 1.0
    rotation: str = "random_orthogonal"
    distribution: str = "gaussian"
    df: float = 5.0
    mu_range: tuple[float, float] = (-0.3, 0.3)
    threads: int = 1

    def __post_init__(self):
        self.c_grid = tuple(float(c) for c in self.c_grid)
        self.p_grid = tuple(int(p) for p in self.p_grid)
        self.modes = tuple(Calibration.parse(m).value for m in self.modes)
        self.mu_range = tuple(float(v) for v in self.mu_range)
        if not self.c_grid or not self.p_grid or not self.modes:
            raise ConfigError("c_grid, p_grid and modes must be non-empty")
        bad = [c for c in self.c_grid if in_guard_band(c) or not c > 0]
        if bad:
            raise RegimeError(f"c grid contains values in the excluded band around 1: {bad}")
        if int(self.replications) < 1:
            raise ConfigError("replications must be >= 1")
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        DgpSpec(n=2, distribution=self.distribution, df=self.df, mu_range=self.mu_range)
        SpectrumSpec(p=1, condition_index=self.condition_index, rotation=self.rotation)

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("c_grid", "p_grid", "modes", "mu_range"):
            d[k] = list(d[k])
        return d


@dataclass
class ExperimentTable:
    """Long-format experiment output plus run metadata."""

    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(EXPERIMENT_HEADER)
        for r in self.rows:
            writer.writerow([repr(r["c"]), r["p"], r["mode"], r["strategy"], r["stat"],
                             repr(float(r["value"])), r["replications"], r["seed"]])
        return buf.getvalue()

    def value(self, c: float, p: int, mode: str, strategy: str, stat: str) -> float:
        for r in self.rows:
            if (math.isclose(r["c"], c) and r["p"] == p and r["mode"] == mode
                    and r["strategy"] == strategy and r["stat"] == stat):
                return float(r["value"])
        raise KeyError((c, p, mode, strategy, stat))


def _one_replication(p, n, mu, Sigma, root, b, gamma, beta, mode, dgp, rng, u_eu):
    """Relative losses and intensities of all strategies on one sample."""
    c = p / n
    X = make_innovations(p, n, dgp, rng)
    Y = mu[:, None] + root @ X
    S = sample_covariance(Y)
    ybar = Y.mean(axis=1)
    cal = CalibrationMode(mode, gamma, beta_override=beta)
    if c < 1:
        w_trad = sample_eu_weights(precision_matrix(S, what="S"), ybar, gamma)
        w_oracle_base = w_trad
        frontier_est = consistent_frontier_lt1(plugin_frontier(S, ybar), c)
    else:
        S_plus = moore_penrose_pinv(S)
        w_trad = sample_eu_weights(S_plus, ybar, gamma, "traditional_pinv")
        S_star, _ = generalized_inverse_oracle(Sigma, X)
        w_oracle_base = sample_eu_weights(S_star, ybar, gamma, "traditional_pinv")
        frontier_est = consistent_frontier_gt1(S_plus, ybar, c)
    a_oracle = finite_sample_alpha(w_oracle_base, b, mu, Sigma, beta)
    a_bona = bona_fide_alpha(frontier_est, target_stats(b, S, ybar), c, gamma, cal)
    portfolios = {
        "traditional": w_trad,
        "oracle_shrunk": gse_weights(a_oracle, w_oracle_base, b, "oracle_shrunk"),
        "bona_fide": gse_weights(a_bona, w_trad, b, "bona_fide"),
        "target": b,
    }
    losses = {k: (u_eu - utility(w, mu, Sigma, gamma)) / u_eu for k, w in portfolios.items()}
    return losses, a_oracle, a_bona


def run_loss_experiment(config: LossExperimentConfig) -> ExperimentTable:
    """Relative-loss sweep over ``(c, p, mode)`` cells.

    For each cell the table holds, per strategy, the mean and median relative
    loss across replications (``loss_mean``, ``loss_median``) and, for the
    shrunk strategies, ``alpha_mean`` and ``alpha_median``. Rows with strategy
    ``theory`` give the limiting losses and intensity; ``loss_shrunk`` includes
    the cross term and ``loss_shrunk_quadratic`` is ``a^2 L_S + (1-a)^2 L_b``.
    A cell whose setup fails gets a single ``error`` row with value NaN;
    replications that fail are counted in a ``failures`` row.
    """
    cfg = config
    table = ExperimentTable(metadata={"config": cfg.as_dict(), "errors": []})
    for ip, p in enumerate(cfg.p_grid):
        Sigma = make_covariance(SpectrumSpec(p, cfg.condition_index, rotation=cfg.rotation,
                                             seed=cfg.seed))
        root = sqrtm_psd(Sigma)
        mu = make_means(p, cfg.mu_range)
        b = np.full(p, 1.0 / p)
        frontier = true_frontier(mu, Sigma)
        tstats = TargetStats(float(b @ mu), float(b @ Sigma @ b))
        for ic, c in enumerate(cfg.c_grid):
            n = max(int(round(p / c)), 2)
            for mode in cfg.modes:
                base = {"c": c, "p": p, "mode": mode, "replications": int(cfg.replications),
                        "seed": int(cfg.seed)}
                try:
                    beta = resolve_beta(CalibrationMode(mode, cfg.gamma), frontier)
                    u_eu = optimal_utility(frontier, cfg.gamma)
                    l_s = relative_loss_traditional(c, frontier, cfg.gamma)
                    l_b = relative_loss_target(frontier, tstats, cfg.gamma)
                    a_lim = oracle_alpha_limit(frontier, tstats, c, cfg.gamma, beta)
                except MvShrinkError as exc:
                    table.rows.append({**base, "strategy": "all", "stat": "error",
                                       "value": float("nan")})
                    table.metadata["errors"].append(
                        {"c": c, "p": p, "mode": mode, "error": exc.name, "message": str(exc)})
                    continue
                dgp = DgpSpec(n=n, distribution=cfg.distribution, df=cfg.df)

                def rep(k, n=n, beta=beta, mode=mode, dgp=dgp, ic=ic, ip=ip):
                    try:
                        return _one_replication(p, n, mu, Sigma, root, b, cfg.gamma, beta, mode,
                                                dgp, _rng(cfg.seed, ip, ic, k), u_eu)
                    except MvShrinkError:
                        return None

                results = _map(rep, range(int(cfg.replications)), cfg.threads)
                ok = [r for r in results if r is not None]
                for strat in STRATEGIES:
                    vals = np.array([r[0][strat] for r in ok]) if ok else np.array([np.nan])
                    table.rows.append({**base, "strategy": strat, "stat": "loss_mean",
                                       "value": float(np.mean(vals))})
                    table.rows.append({**base, "strategy": strat, "stat": "loss_median",
                                       "value": float(np.median(vals))})
                for strat, idx in (("oracle_shrunk", 1), ("bona_fide", 2)):
                    vals = np.array([r[idx] for r in ok]) if ok else np.array([np.nan])
                    table.rows.append({**base, "strategy": strat, "stat": "alpha_mean",
                                       "value": float(np.mean(vals))})
                    table.rows.append({**base, "strategy": strat, "stat": "alpha_median",
                                       "value": float(np.median(vals))})
                theory = {"loss_traditional": l_s, "loss_target": l_b,
                          "loss_shrunk": relative_loss_gse_limit(a_lim, c, frontier, tstats,
                                                                 cfg.gamma),
                          "loss_shrunk_quadratic": relative_loss_gse(a_lim, l_s, l_b),
                          "alpha": a_lim}
                for stat, v in theory.items():
                    table.rows.append({**base, "strategy": "theory", "stat": stat,
                                       "value": float(v)})
                table.rows.append({**base, "strategy": "all", "stat": "failures",
                                   "value": float(len(results) - len(ok))})
    return table
