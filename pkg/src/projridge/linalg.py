"""Dense linear-algebra substrate.

Thin SVD with numerical-rank truncation, projection of coefficient vectors
onto the row space of the design, construction of non-identifiable
coefficient pairs for rank-deficient designs, and spectral diagnostics.

Design matrices are plain (n, p) float64 arrays.  A factorization is an
immutable value object; its arrays are marked read-only so it can be
shared freely across threads and worker processes.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError

# Singular values s_j count toward the rank iff s_j > RANK_RTOL(n, p) * s_max.
_EPS = float(np.finfo(np.float64).eps)


def rank_tolerance(n: int, p: int, s_max: float) -> float:
    """Relative numerical-rank cutoff: max(n, p) * machine-eps * s_max."""
    return max(n, p) * _EPS * s_max


def as_design(X) -> np.ndarray:
    """Validate and return an (n, p) float64 design matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError(f"design matrix must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if n < 1 or p < 1:
        raise InputError("design matrix needs at least one row and one column")
    if not np.all(np.isfinite(X)):
        raise InputError("design matrix contains non-finite entries")
    return X


@dataclass(frozen=True)
class SvdFactorization:
    """Thin SVD X = P diag(d) Q' truncated at the rank tolerance.

    Attributes
    ----------
    P : (n, r) ndarray with orthonormal columns.
    d : (r,) strictly positive singular values, decreasing.
    Q : (p, r) ndarray with orthonormal columns.
    rank : numerical rank r.
    n, p : design dimensions.
    tolerance : absolute singular-value cutoff used for truncation.
    """

    P: np.ndarray
    d: np.ndarray
    Q: np.ndarray
    rank: int
    n: int
    p: int
    tolerance: float

    def __post_init__(self):
        for a in (self.P, self.d, self.Q):
            a.setflags(write=False)

    def xmatvec(self, v: np.ndarray) -> np.ndarray:
        """X @ v computed through the factorization (exact up to truncation)."""
        return self.P @ (self.d * (self.Q.T @ v))

    def reconstruct(self) -> np.ndarray:
        """P diag(d) Q', the rank-r reconstruction of X."""
        return (self.P * self.d) @ self.Q.T


def factorize(X) -> SvdFactorization:
    """Thin SVD of the design with rank truncation and a fixed sign convention.

    The sign convention makes each column of P have a nonnegative entry of
    largest absolute value, so repeated factorizations of the same matrix
    agree exactly.

    Raises
    ------
    InputError
        If the design is the zero matrix ("rank zero design") or has
        non-finite entries.
    """
    X = as_design(X)
    n, p = X.shape
    # LAPACK thin SVD: O(min(n,p)^2 * max(n,p)) work, never forms a p x p
    # matrix for wide designs.
    P_full, s, Qt = np.linalg.svd(X, full_matrices=False)
    s_max = float(s[0]) if s.size else 0.0
    if s_max == 0.0:
        raise InputError("rank zero design")
    tol = rank_tolerance(n, p, s_max)
    r = int(np.sum(s > tol))
    if r == 0:
        raise InputError("rank zero design")
    P = P_full[:, :r].copy()
    d = s[:r].copy()
    Q = Qt[:r].T.copy()
    lead = np.argmax(np.abs(P), axis=0)
    flip = P[lead, np.arange(r)] < 0.0
    P[:, flip] *= -1.0
    Q[:, flip] *= -1.0
    return SvdFactorization(P=P, d=d, Q=Q, rank=r, n=n, p=p, tolerance=tol)


def project(beta, F: SvdFactorization) -> np.ndarray:
    """Projection Q Q' beta of a coefficient vector onto the row space of X.

    The projection preserves fitted values (X @ project(beta) == X @ beta)
    and is the only part of beta the data can identify when p > rank(X).
    """
    beta = _as_pvector(beta, F.p)
    return F.Q @ (F.Q.T @ beta)


def in_row_space(v, F: SvdFactorization, rtol: float = 1e-10) -> bool:
    """True if v is within rtol * max(1, ||v||) of its row-space projection."""
    v = _as_pvector(v, F.p)
    resid = v - F.Q @ (F.Q.T @ v)
    return float(np.linalg.norm(resid)) <= rtol * max(1.0, float(np.linalg.norm(v)))


def null_direction(F: SvdFactorization) -> np.ndarray:
    """A unit vector orthogonal to the row space of X.

    Computed by orthogonalizing a standard basis probe against the columns
    of Q (two Gram-Schmidt passes); the full (p, p-r) orthocomplement basis
    is never materialized.  Requires p > rank.
    """
    if F.p == F.rank:
        raise InputError("design has full column rank; beta is identifiable")
    # Probe the coordinate whose Q-row carries the least mass: the residual
    # norm is then at least sqrt(1 - rank/p) > 0.
    row_mass = np.einsum("ij,ij->i", F.Q, F.Q)
    k = int(np.argmin(row_mass))
    z = -(F.Q @ F.Q[k])
    z[k] += 1.0
    z -= F.Q @ (F.Q.T @ z)
    norm = float(np.linalg.norm(z))
    return z / norm


def nonidentifiable_pair(F: SvdFactorization, beta) -> tuple[np.ndarray, np.ndarray]:
    """Two coefficient vectors at unit distance with identical fitted values.

    Returns (beta, beta + z) where z is a unit null-space direction, so
    X beta1 == X beta2 while ||beta1 - beta2|| == 1.  Demonstrates that
    beta is not identifiable when p > rank(X).
    """
    beta = _as_pvector(beta, F.p)
    z = null_direction(F)
    return beta, beta + z


@dataclass(frozen=True)
class SpectralDiagnostics:
    """Extreme eigenvalues of X'X and the numerical rank.

    lambda_min_pos is the smallest *positive* eigenvalue (the square of the
    smallest retained singular value).  rank_tolerance records the cutoff
    convention used to decide the rank, since any finite-sample rank call
    is tolerance-dependent.
    """

    lambda_min_pos: float
    lambda_max: float
    rank: int
    rank_tolerance: float


def spectral_diagnostics(F: SvdFactorization) -> SpectralDiagnostics:
    return SpectralDiagnostics(
        lambda_min_pos=float(F.d[-1] ** 2),
        lambda_max=float(F.d[0] ** 2),
        rank=F.rank,
        rank_tolerance=F.tolerance,
    )


def _as_pvector(v, p: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (p,):
        raise InputError(f"expected a vector of length {p}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError("vector contains non-finite entries")
    return v
