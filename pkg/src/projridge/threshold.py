"""Hard thresholding of the ridge fit and the associated schedules.

The threshold is a_n = C1 * n^(-alpha) and the matching regularization
parameter follows either the gaussian-noise schedule
    h_n = C2 * a_n^-2 * (log log n)^3 * log(n v p)
or the finite-moment schedule
    h_n = C2 * a_n^-2 * (log log n)^2 * (n v p)^(2*xi/(3*l)),  xi = 3*l*(t+1)/k.

All logarithms are natural.  Schedules require n >= 16 so that
log log n > 1 and u_n = 1 + 1/log(log n) lies in (1, 2).

Index sets are 0-based and returned sorted ascending.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .ridge import RidgeFit

MIN_SCHEDULE_N = 16

GAUSSIAN = "gaussian"
MOMENT = "moment"


@dataclass(frozen=True)
class ScheduleParams:
    """Constants of the thresholding and regularization schedules.

    c1, alpha parameterize the threshold; c2 the regularization level.
    The moment regime additionally uses the polynomial dimension exponent
    l >= 1, an even moment order k, and the target rate exponent t > 0.
    """

    c1: float
    alpha: float = 0.5
    c2: float = 1.0
    regime: str = GAUSSIAN
    l: float = 1.0
    k: int = 8
    t: float = 1.0

    def __post_init__(self):
        if not self.c1 > 0:
            raise InputError("c1 must be positive")
        if not 0 < self.alpha <= 0.5:
            raise InputError("alpha must lie in (0, 1/2]")
        if not self.c2 > 0:
            raise InputError("c2 must be positive")
        if self.regime not in (GAUSSIAN, MOMENT):
            raise InputError(f"unknown regime {self.regime!r}")
        if self.regime == MOMENT:
            if self.k <= 0 or self.k % 2 != 0:
                raise InputError("moment order k must be a positive even integer")
            if not self.l >= 1:
                raise InputError("dimension exponent l must be >= 1")
            if not self.t > 0:
                raise InputError("rate exponent t must be positive")
            if 3.0 * self.l * (self.t + 1.0) / self.k >= 1.0:
                warnings.warn(
                    "moment schedule has 3*l*(t+1)/k >= 1; the selection "
                    "guarantee needs a larger moment order k",
                    UserWarning,
                    stacklevel=2,
                )


def threshold_value(n: int, s: ScheduleParams) -> float:
    """a_n = c1 * n^(-alpha)."""
    if n < 1:
        raise InputError("n must be a positive integer")
    return s.c1 * float(n) ** (-s.alpha)


def regularization_value(n: int, p: int, s: ScheduleParams) -> float:
    """h_n for the selected regime; requires n >= 16."""
    if n < MIN_SCHEDULE_N:
        raise InputError("schedule undefined for tiny n; supply h explicitly")
    if p < 1:
        raise InputError("p must be a positive integer")
    a = threshold_value(n, s)
    lln = math.log(math.log(n))
    m = float(max(n, p))
    if s.regime == GAUSSIAN:
        return s.c2 * a**-2 * lln**3 * math.log(m)
    xi = 3.0 * s.l * (s.t + 1.0) / s.k
    return s.c2 * a**-2 * lln**2 * m ** (2.0 * xi / (3.0 * s.l))


def u_value(n: int) -> float:
    """Band half-width factor u_n = 1 + 1/log(log n); needs n >= 16."""
    if n < MIN_SCHEDULE_N:
        raise InputError("schedule undefined for tiny n; supply h explicitly")
    return 1.0 + 1.0 / math.log(math.log(n))


def index_set(xi, c: float) -> np.ndarray:
    """Indices j with |xi_j| > c (strict), sorted ascending, 0-based."""
    if c < 0:
        raise InputError("cutoff must be nonnegative")
    xi = np.asarray(xi, dtype=np.float64)
    return np.flatnonzero(np.abs(xi) > c)


@dataclass(frozen=True)
class ThresholdedFit:
    """Hard-thresholded ridge coefficients and the surviving index set.

    theta_tilde_j equals the ridge coefficient exactly when its absolute
    value exceeds a and is zero otherwise (ties are zeroed).
    """

    theta_tilde: np.ndarray
    selected: np.ndarray
    a: float
    h: float
    base: RidgeFit

    def __post_init__(self):
        self.theta_tilde.setflags(write=False)
        self.selected.setflags(write=False)


def apply_threshold(fit: RidgeFit, a: float) -> ThresholdedFit:
    """Componentwise hard threshold of a ridge fit at level a > 0."""
    if not a > 0:
        raise InputError("threshold must be positive")
    keep = np.abs(fit.theta_hat) > a
    theta_tilde = np.where(keep, fit.theta_hat, 0.0)
    return ThresholdedFit(
        theta_tilde=theta_tilde,
        selected=np.flatnonzero(keep),
        a=float(a),
        h=fit.h,
        base=fit,
    )


@dataclass(frozen=True)
class SparsityProfile:
    """Counts of large components of theta and the L1 mass of small ones.

    q_n counts |theta_j| > a; q_minus and q_plus count against the wider
    band cutoffs a * u_n and a / u_n; v_n sums |theta_j| over the small
    set {|theta_j| <= a}.
    """

    q_n: int
    q_minus: int
    q_plus: int
    v_n: float
    u_n: float
    a: float


def sparsity_profile(theta, n: int, a: float) -> SparsityProfile:
    if not a > 0:
        raise InputError("threshold must be positive")
    u = u_value(n)
    theta = np.asarray(theta, dtype=np.float64)
    mag = np.abs(theta)
    return SparsityProfile(
        q_n=int(np.sum(mag > a)),
        q_minus=int(np.sum(mag > a * u)),
        q_plus=int(np.sum(mag > a / u)),
        v_n=float(np.sum(mag[mag <= a])),
        u_n=u,
        a=float(a),
    )


@dataclass(frozen=True)
class BandCheck:
    """Whether the selected set sits inside the theoretical band.

    lower_ok: every index with |theta_j| > a*u_n was selected.
    upper_ok: every selected index has |theta_j| > a/u_n.
    """

    lower_ok: bool
    upper_ok: bool


def selection_band_check(
    theta, tfit: ThresholdedFit, profile: SparsityProfile
) -> BandCheck:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != tfit.theta_tilde.shape:
        raise InputError("theta and the fit have different dimensions")
    lower = index_set(theta, profile.a * profile.u_n)
    upper = index_set(theta, profile.a / profile.u_n)
    selected = tfit.selected
    return BandCheck(
        lower_ok=bool(np.isin(lower, selected).all()),
        upper_ok=bool(np.isin(selected, upper).all()),
    )
