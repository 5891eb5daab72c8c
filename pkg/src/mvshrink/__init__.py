"""Shrinkage estimation of expected-utility portfolios in high dimensions."""

__version__ = "0.1.0"

from mvshrink._types import (  # noqa: E402
    Calibration,
    CalibrationMode,
    FrontierParams,
    PortfolioWeights,
    TargetStats,
)
from mvshrink.core import (  # noqa: E402
    generalized_inverse_oracle,
    moore_penrose_pinv,
    q_matrix,
    rank_one_pinv_update,
    sample_covariance,
    sample_mean,
)
from mvshrink.estimator import ShrinkageEUPortfolio  # noqa: E402
from mvshrink.exceptions import (  # noqa: E402
    ConfigError,
    DataFormatError,
    MvShrinkError,
    NumericalError,
    RegimeError,
)
from mvshrink.frontier import (  # noqa: E402
    consistent_frontier_gt1,
    consistent_frontier_lt1,
    gmv_weights,
    plugin_frontier,
    target_stats,
    true_frontier,
)
from mvshrink.loss import (  # noqa: E402
    LossReport,
    relative_loss_gse,
    relative_loss_target,
    relative_loss_traditional,
    utility,
)
from mvshrink.shrinkage import (  # noqa: E402
    bona_fide_alpha,
    eu_weights_true,
    finite_sample_alpha,
    gse_weights,
    oracle_alpha_limit,
    resolve_beta,
    sample_eu_weights,
)

__all__ = [
    "Calibration", "CalibrationMode", "FrontierParams", "PortfolioWeights", "TargetStats",
    "ShrinkageEUPortfolio", "MvShrinkError", "ConfigError", "DataFormatError",
    "NumericalError", "RegimeError", "sample_mean", "sample_covariance", "moore_penrose_pinv",
    "generalized_inverse_oracle", "rank_one_pinv_update", "q_matrix", "gmv_weights",
    "true_frontier", "plugin_frontier", "consistent_frontier_lt1", "consistent_frontier_gt1",
    "target_stats", "eu_weights_true", "sample_eu_weights", "finite_sample_alpha",
    "oracle_alpha_limit", "bona_fide_alpha", "gse_weights", "resolve_beta", "utility",
    "relative_loss_traditional", "relative_loss_target", "relative_loss_gse", "LossReport",
]
