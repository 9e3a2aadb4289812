"""Closed-form leave-one-out tuning of the thresholding constants (C1, C2).

The criterion is

    psi_hat(C) = (1/n) * sum_i ((y_i - x_i' theta_tilde(C)) / (1 - w_i(C)))^2

with w_i the ridge leverage at the scheduled h_n(C).  For a pure ridge fit
(thresholding disabled) this is the exact leave-one-out average; with
thresholding active it is the standard plug-in approximation, since the
thresholding step is not linear in y.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .linalg import SvdFactorization
from .ridge import RidgeFit, _as_response, fit_ridge
from .threshold import (
    GAUSSIAN,
    ScheduleParams,
    apply_threshold,
    regularization_value,
    threshold_value,
)

LEVERAGE_CEILING = 1.0 - 1e-12

# Scale-aware default grid.  C1 runs over half-octave multiples of the
# sample standard deviation of y, so the threshold straddles the size of
# the fitted components whatever the response scale.  The C2 values are
# normalized by n * (log log n)^3 * log(n v p): the regularization the
# schedule produces at a given threshold multiplier is then invariant to
# the sample size, which keeps one grid usable across problem sizes.
DEFAULT_C1_MULTIPLIERS = tuple(2.0 ** (-k / 2.0) for k in range(20, 0, -1))
DEFAULT_C2_NUMERATORS = tuple(10.0 ** (e / 2.0) for e in range(3, 10))
DEFAULT_ALPHA = 0.5


@dataclass(frozen=True)
class TuningGrid:
    """Ascending grids of positive C1 and C2 values at a fixed alpha."""

    c1_values: tuple
    c2_values: tuple
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        for name, values in (("c1", self.c1_values), ("c2", self.c2_values)):
            if len(values) == 0:
                raise InputError(f"{name} grid is empty")
            arr = np.asarray(values, dtype=np.float64)
            if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
                raise InputError(f"{name} grid values must be positive and finite")
            if not np.all(np.diff(arr) >= 0):
                raise InputError(f"{name} grid must be ascending")
        if not 0 < self.alpha <= 0.5:
            raise InputError("alpha must lie in (0, 1/2]")


def default_grid(y, n: int, p: int, alpha: float = DEFAULT_ALPHA) -> TuningGrid:
    """Default (C1, C2) grid for an n x p problem (see module constants)."""
    y = np.asarray(y, dtype=np.float64)
    sd = float(np.std(y, ddof=1)) if y.size > 1 else 1.0
    if not np.isfinite(sd) or sd <= 0:
        sd = 1.0
    scale = 1.0 / (n * math.log(math.log(n)) ** 3 * math.log(max(n, p)))
    return TuningGrid(
        c1_values=tuple(m * sd for m in DEFAULT_C1_MULTIPLIERS),
        c2_values=tuple(v * scale for v in DEFAULT_C2_NUMERATORS),
        alpha=alpha,
    )


def loocv_criterion(F: SvdFactorization, y, coeffs, fit: RidgeFit) -> float:
    """(1/n) sum_i ((y_i - x_i' coeffs) / (1 - w_i))^2 for given coefficients.

    coeffs may be the ridge vector itself (exact leave-one-out identity) or
    its thresholded version; the leverages come from the ridge fit whose h
    produced coeffs.
    """
    y = _as_response(y, F.n)
    w = fit.leverages
    if np.any(w >= LEVERAGE_CEILING):
        raise NumericalError("degenerate leverage; increase regularization")
    fitted = F.P @ (F.d * (F.Q.T @ coeffs))
    resid = (y - fitted) / (1.0 - w)
    return float(np.mean(resid**2))


def psi_hat_at(F: SvdFactorization, y, a: float, h: float) -> float:
    """Criterion at an explicit threshold a (a == 0 disables thresholding)."""
    if a < 0:
        raise InputError("threshold must be nonnegative")
    fit = fit_ridge(F, y, h)
    coeffs = fit.theta_hat if a == 0 else apply_threshold(fit, a).theta_tilde
    return loocv_criterion(F, y, coeffs, fit)


def psi_hat(
    F: SvdFactorization,
    y,
    c1: float,
    c2: float,
    alpha: float = DEFAULT_ALPHA,
    regime: str = GAUSSIAN,
    **schedule_kwargs,
) -> float:
    """Criterion at scheduled a_n(c1, alpha) and h_n(c1, c2, alpha)."""
    s = ScheduleParams(c1=c1, alpha=alpha, c2=c2, regime=regime, **schedule_kwargs)
    a = threshold_value(F.n, s)
    h = regularization_value(F.n, F.p, s)
    return psi_hat_at(F, y, a, h)


@dataclass(frozen=True)
class CvResult:
    """Grid of criterion values and the first-occurrence argmin."""

    best_c1: float
    best_c2: float
    psi_values: np.ndarray
    best_value: float

    def __post_init__(self):
        self.psi_values.setflags(write=False)


def tune(
    F: SvdFactorization, y, grid: TuningGrid, regime: str = GAUSSIAN
) -> CvResult:
    """Evaluate psi_hat over the grid and return the argmin.

    Ties break to the smallest c1, then the smallest c2 (first occurrence).
    Grid points that fail numerically are recorded as NaN; if every point
    fails, a NumericalError is raised.
    """
    psi = np.full((len(grid.c1_values), len(grid.c2_values)), np.nan)
    best = (None, None, np.inf)
    for i, c1 in enumerate(grid.c1_values):
        for j, c2 in enumerate(grid.c2_values):
            try:
                value = psi_hat(F, y, c1, c2, alpha=grid.alpha, regime=regime)
            except NumericalError:
                continue
            psi[i, j] = value
            if value < best[2]:
                best = (c1, c2, value)
    if best[0] is None:
        raise NumericalError("no admissible tuning point")
    return CvResult(
        best_c1=float(best[0]),
        best_c2=float(best[1]),
        psi_values=psi,
        best_value=float(best[2]),
    )
