"""Small value types passed between modules."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mvshrink.exceptions import ConfigError

PROVENANCES = frozenset(
    {"true_eu", "traditional", "traditional_pinv", "oracle_shrunk", "bona_fide", "target", "gmv"}
)
FRONTIER_SOURCES = frozenset({"true", "plugin", "consistent_lt1", "consistent_gt1"})


class Calibration(str, enum.Enum):
    """Criterion used to calibrate the shrinkage intensity."""

    MEAN_VARIANCE = "mean_variance"
    MIN_VARIANCE = "min_variance"
    SHARPE_RATIO = "sharpe_ratio"

    @classmethod
    def parse(cls, value: "Calibration | str") -> "Calibration":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"meanvariance": "mean_variance", "mv": "mean_variance",
                   "minvariance": "min_variance", "gmv": "min_variance",
                   "sharperatio": "sharpe_ratio", "sharpe": "sharpe_ratio"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown calibration mode {value!r}") from None


@dataclass(frozen=True)
class CalibrationMode:
    """Calibration criterion plus the investor's risk aversion.

    ``beta_override`` replaces the criterion's own beta when given.
    """

    mode: Calibration = Calibration.MEAN_VARIANCE
    gamma: float = 1.0
    beta_override: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Calibration.parse(self.mode))
        if not (self.gamma > 0) or not math.isfinite(self.gamma):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if self.beta_override is not None and not (self.beta_override > 0):
            raise ConfigError(f"beta_override must be positive, got {self.beta_override}")


@dataclass(frozen=True)
class PortfolioWeights:
    """Weight vector summing to one, tagged with how it was produced."""

    w: NDArray[np.float64]
    provenance: str
    alpha: float | None = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).ravel()
        if self.provenance not in PROVENANCES:
            raise ConfigError(f"unknown provenance {self.provenance!r}")
        if not np.all(np.isfinite(w)):
            raise ConfigError("portfolio weights contain non-finite values")
        # round-off in the sum grows with the gross exposure
        tol = 1e-10 * max(1.0, float(np.abs(w).sum()))
        if abs(w.sum() - 1.0) > tol:
            raise ConfigError(f"portfolio weights sum to {w.sum():.12g}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return self.w.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.w if dtype is None else self.w.astype(dtype)


def as_weights(b: "PortfolioWeights | ArrayLike", provenance: str = "target") -> PortfolioWeights:
    if isinstance(b, PortfolioWeights):
        return b
    return PortfolioWeights(np.asarray(b, dtype=np.float64), provenance)


@dataclass(frozen=True)
class FrontierParams:
    """Efficient-frontier triple: GMV return, GMV variance and slope ``s = mu'Q mu``."""

    r_gmv: float
    v_gmv: float
    s: float
    source: str = "true"
    note: str = field(default="", compare=False)

    def __post_init__(self):
        if self.source not in FRONTIER_SOURCES:
            raise ConfigError(f"unknown frontier source {self.source!r}")
        if self.source in ("true", "plugin"):
            if not (self.v_gmv > 0):
                raise ConfigError(f"v_gmv must be positive for a {self.source} frontier")
        elif self.v_gmv < 0:
            warnings.warn(f"estimated v_gmv is negative ({self.v_gmv:.4g})", RuntimeWarning,
                          stacklevel=3)
        if self.source == "true" and self.s < -1e-10 * max(1.0, abs(self.r_gmv)):
            raise ConfigError(f"true slope parameter must be non-negative, got {self.s}")

    @property
    def approximate(self) -> bool:
        return self.source == "consistent_gt1"

    def as_dict(self) -> dict:
        out = {"r_gmv": self.r_gmv, "v_gmv": self.v_gmv, "s": self.s, "source": self.source}
        if self.note:
            out["note"] = self.note
        return out


@dataclass(frozen=True)
class TargetStats:
    """Expected return and variance of a target portfolio."""

    r_b: float
    v_b: float

    def __post_init__(self):
        if self.v_b < 0:
            raise ConfigError(f"target variance must be non-negative, got {self.v_b}")
