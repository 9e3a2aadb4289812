"""Ridge regression of the row-space projection, in dual (n-sized) form.

The estimator (X'X + h I_p)^{-1} X' y equals X' (X X' + h I_n)^{-1} y, so
everything here is evaluated in the spectral basis of a cached thin SVD:
no p x p matrix is ever formed.  Closed-form bias/variance quantities and
the exact finite-sample expected L2 error are provided as oracles for the
simulation harness and the test suite.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .linalg import SvdFactorization, _as_pvector, in_row_space


@dataclass(frozen=True)
class RidgeFit:
    """Fitted ridge coefficients and the hat-matrix diagonal.

    theta_hat always lies in the row space of the design.  leverages[i] is
    w_i = x_i' (X'X + h I_p)^{-1} x_i, used by the leave-one-out shortcut;
    0 <= w_i < 1 holds for every i whenever h > 0.
    """

    theta_hat: np.ndarray
    h: float
    leverages: np.ndarray

    def __post_init__(self):
        self.theta_hat.setflags(write=False)
        self.leverages.setflags(write=False)


def _as_response(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (n,):
        raise InputError(f"response must have length {n}, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InputError("response contains non-finite entries")
    return y


def fit_ridge(F: SvdFactorization, y, h: float) -> RidgeFit:
    """Ridge fit theta_hat = Q diag(d / (d^2 + h)) P' y.

    Equivalent to the primal (X'X + h I_p)^{-1} X' y but costs only an
    n-sized computation given the cached SVD.
    """
    if not h > 0:
        raise InputError("regularization must be positive")
    y = _as_response(y, F.n)
    d2 = F.d**2
    z = F.P.T @ y
    theta_hat = F.Q @ (F.d / (d2 + h) * z)
    leverages = (F.P**2) @ (d2 / (d2 + h))
    return RidgeFit(theta_hat=theta_hat, h=float(h), leverages=leverages)


@dataclass(frozen=True)
class BiasVarianceOracle:
    """Exact bias vector of the ridge fit and the scalar variance bound.

    bias = -Q (h^{-1} D^2 + I_r)^{-1} Q' theta, i.e. the bias of theta_hat
    as an estimator of the projection theta; var_bound = sigma^2 / h bounds
    l' var(theta_hat) l for every unit vector l.
    """

    bias: np.ndarray
    var_bound: float


ROW_SPACE_RTOL = 1e-10


def _check_projection(theta, F: SvdFactorization) -> np.ndarray:
    theta = _as_pvector(theta, F.p)
    if not in_row_space(theta, F, rtol=ROW_SPACE_RTOL):
        raise InputError(
            "theta is not in the row space of the design (projection contract)"
        )
    return theta


def bias_variance_oracle(
    F: SvdFactorization, theta, h: float, sigma: float
) -> BiasVarianceOracle:
    """Closed-form bias of the ridge fit at theta and the sigma^2/h bound."""
    if not h > 0:
        raise InputError("regularization must be positive")
    if not sigma > 0:
        raise InputError("sigma must be positive")
    theta = _check_projection(theta, F)
    g = F.Q.T @ theta
    bias = -(F.Q @ (h / (F.d**2 + h) * g))
    return BiasVarianceOracle(bias=bias, var_bound=float(sigma**2 / h))


def expected_l2_error(F: SvdFactorization, theta, h: float, sigma: float) -> float:
    """Exact n^{-1} E ||X theta_hat - X theta||^2 at noise level sigma.

    Computed in the spectral basis as
    n^{-1} (sigma^2 * sum_j d_j^4/(d_j^2+h)^2 + ||X bias||^2).
    """
    if not h > 0:
        raise InputError("regularization must be positive")
    if sigma < 0:
        raise InputError("sigma must be nonnegative")
    theta = _check_projection(theta, F)
    d2 = F.d**2
    shrink = d2 / (d2 + h)
    variance_term = sigma**2 * float(np.sum(shrink**2))
    g = F.Q.T @ theta
    xbias_sq = float(np.sum(d2 * (h / (d2 + h)) ** 2 * g**2))
    return (variance_term + xbias_sq) / F.n


def prediction_mse(F: SvdFactorization, theta, h: float, sigma: float) -> float:
    """Average prediction MSE: sigma^2 + expected_l2_error(...)."""
    return sigma**2 + expected_l2_error(F, theta, h, sigma)
