"""Log-log regression and binomial intervals."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _st

from .errors import EstimationError


@dataclass(frozen=True)
class ExponentEstimate:
    """A fitted scaling exponent.

    ``points_used`` holds the ``(abscissa, ordinate)`` pairs that entered the
    fit, already in log coordinates; ``excluded`` holds the raw inputs that
    were dropped (saturated or zero-event points).
    """

    slope: float
    intercept: float
    stderr: float
    points_used: tuple[tuple[float, float], ...]
    excluded: tuple = field(default=())

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")
        if len(self.points_used) < 3:
            raise ValueError("a valid fit needs at least 3 points")


def linear_fit(x, y, weights=None, known_variance=False):
    """Least-squares line through ``(x, y)``.

    Returns ``(slope, intercept, stderr_of_slope)``. With ``weights`` the fit
    is weighted; ``known_variance=True`` treats the weights as exact inverse
    variances instead of estimating the residual scale.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise EstimationError(f"need at least 3 points, got {x.size}")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    A = np.column_stack([x, np.ones_like(x)])
    Aw = A * np.sqrt(w)[:, None]
    yw = y * np.sqrt(w)
    coef, *_ = np.linalg.lstsq(Aw, yw, rcond=None)
    cov = np.linalg.inv(Aw.T @ Aw)
    if not known_variance:
        resid = yw - Aw @ coef
        dof = x.size - 2
        cov = cov * (float(resid @ resid) / dof)
    stderr = float(np.sqrt(max(cov[0, 0], 0.0)))
    return float(coef[0]), float(coef[1]), stderr


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for ``k`` successes in ``n`` trials."""
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(_st.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(_st.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def log_probability_fit(snrs, counts, n_trials) -> ExponentEstimate:
    """Slope of ``-log p`` against ``log snr`` with binomial weights.

    SNR points with zero events cannot enter a log fit and are reported in
    ``excluded``. The delta-method variance of ``log p`` is ``(1-p)/(n p)``;
    ``p`` is capped at ``1 - 1/(2n)`` so certain events keep a finite weight.
    """
    snrs = np.asarray(snrs, dtype=float)
    counts = np.asarray(counts, dtype=np.int64)
    n_trials = np.broadcast_to(np.asarray(n_trials, dtype=np.int64), counts.shape)
    keep = counts > 0
    excluded = tuple(float(s) for s in snrs[~keep])
    if keep.sum() < 3:
        raise EstimationError(
            f"exponent undetectable at this scale: {int(keep.sum())} SNR points "
            f"with nonzero events (need 3)"
        )
    n = n_trials[keep].astype(float)
    p = counts[keep] / n
    x = np.log(snrs[keep])
    y = -np.log(p)
    p_cap = np.minimum(p, 1.0 - 0.5 / n)
    w = n * p_cap / (1.0 - p_cap)
    slope, intercept, stderr = linear_fit(x, y, w, known_variance=True)
    return ExponentEstimate(
        slope=slope,
        intercept=intercept,
        stderr=stderr,
        points_used=tuple(zip(x.tolist(), y.tolist())),
        excluded=excluded,
    )
