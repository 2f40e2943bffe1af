"""Least-squares lines in log-log coordinates and Pearson correlation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class LinearFit:
    """``y ~ slope * x + intercept`` on the (possibly log-transformed) points.

    ``pearson`` is ``None`` and ``degenerate`` is set when either coordinate is
    constant, in which case the correlation is undefined.
    """

    slope: float
    intercept: float
    pearson: float | None
    n_points: int
    n_dropped: int = 0
    domain: str = ""
    degenerate: bool = False

    @property
    def a(self) -> float:
        """Decay rate in ``log y = -a log x + b``."""
        return -self.slope

    @property
    def b(self) -> float:
        return self.intercept

    def sidecar(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "pearson": self.pearson,
            "n_points": self.n_points,
            "n_dropped": self.n_dropped,
        }

    def to_dict(self) -> dict:
        return asdict(self)


def pearson(xs, ys) -> float | None:
    """Pearson correlation; ``None`` when either variable has zero variance."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise FitError("pearson needs two equal-length sequences with at least 2 points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    return float(stats.pearsonr(x, y).statistic)


def linear_fit(xs, ys, domain: str = "linear", n_dropped: int = 0) -> LinearFit:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2:
        raise FitError(f"need at least 2 usable points, got {x.size}")
    if np.ptp(x) == 0:
        raise FitError("all x values are equal; slope undefined")
    if np.ptp(y) == 0:
        return LinearFit(0.0, float(y[0]), None, x.size, n_dropped, domain, degenerate=True)
    res = stats.linregress(x, y)
    return LinearFit(float(res.slope), float(res.intercept), float(res.rvalue), x.size, n_dropped, domain)


def loglog_fit(xs, ys, use_abs: bool = False) -> LinearFit:
    """OLS of ``log y`` on ``log x``.

    Nonpositive ``y`` values are dropped (after taking ``|y|`` when
    ``use_abs``) and counted in ``n_dropped``; so are nonpositive ``x``.
    """
    x = np.asarray(xs, dtype=float).reshape(-1)
    y = np.asarray(ys, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise FitError("x and y must have the same length")
    if use_abs:
        y = np.abs(y)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    dropped = int(x.size - np.count_nonzero(keep))
    domain = "log|y| vs log x" if use_abs else "log y vs log x"
    return linear_fit(np.log(x[keep]), np.log(y[keep]), domain, dropped)


def decay_exponent_envelope(N, d: int) -> float:
    """``(log N / N)^(1/(d+4))``, the rate envelope for spectral convergence."""
    return (math.log(N) / N) ** (1.0 / (d + 4))
