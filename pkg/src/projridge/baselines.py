"""LASSO and elastic-net baselines via cyclic coordinate descent.

Objectives (columns used as-is, no internal standardization):

    lasso:  (1/(2n)) ||y - X b||^2 + lam * ||b||_1
    enet :  (1/(2n)) ||y - X b||^2 + lam * ||b||_1 + (lam2/2) * ||b||^2

The solver works on the Gram form G = X'X/n, c = X'y/n and maintains the
residual correlations rho = c - G b incrementally, so a coordinate sweep
costs O(p) per touched coordinate.  Iteration stops once the largest
coefficient change in a sweep falls below tol *and* the KKT residual is
within 10*tol; hitting max_iter first returns the fit flagged as not
converged.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .simgen import rng_stream, PURPOSE_FOLDS

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


@dataclass(frozen=True)
class PenaltyConfig:
    """L1/L2 penalty weights and solver controls."""

    lam: float
    lam2: float = 0.0
    max_iter: int = 100_000
    tol: float = 1e-7

    def __post_init__(self):
        if self.lam < 0 or self.lam2 < 0:
            raise InputError("penalty weights must be nonnegative")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if self.max_iter < 1:
            raise InputError("max_iter must be a positive integer")


@dataclass(frozen=True)
class BaselineFit:
    """Coordinate-descent solution with convergence diagnostics.

    kkt_residual is the maximum violation of the subgradient optimality
    conditions at the returned coefficients; objective_path holds the
    objective value after each full sweep when recording was requested.
    """

    coef: np.ndarray
    converged: bool
    n_cycles: int
    kkt_residual: float
    objective_path: np.ndarray | None = None

    def __post_init__(self):
        self.coef.setflags(write=False)


def _kkt_residual(rho, b, lam, lam2):
    zero = b == 0.0
    viol_zero = np.maximum(np.abs(rho[zero]) - lam, 0.0)
    viol_active = np.abs(rho[~zero] - lam2 * b[~zero] - lam * np.sign(b[~zero]))
    worst = 0.0
    if viol_zero.size:
        worst = max(worst, float(viol_zero.max()))
    if viol_active.size:
        worst = max(worst, float(viol_active.max()))
    return worst


def _cd_sweeps(G, c, lam, lam2, b, rho, max_iter, tol, obj_out, record, ycost,
               require_kkt):
    p = G.shape[0]
    n_cycles = 0
    converged = False
    for it in range(max_iter):
        max_delta = 0.0
        for j in range(p):
            gjj = G[j, j]
            denom = gjj + lam2
            old = b[j]
            if denom <= 0.0:
                bj = 0.0
            else:
                z = rho[j] + gjj * old
                if z > lam:
                    bj = (z - lam) / denom
                elif z < -lam:
                    bj = (z + lam) / denom
                else:
                    bj = 0.0
            if bj != old:
                delta = bj - old
                b[j] = bj
                for k in range(p):
                    rho[k] -= G[j, k] * delta
                ad = abs(delta)
                if ad > max_delta:
                    max_delta = ad
        n_cycles = it + 1
        if record:
            s = 0.0
            l1 = 0.0
            l2 = 0.0
            for j in range(p):
                s += (c[j] + rho[j]) * b[j]
                l1 += abs(b[j])
                l2 += b[j] * b[j]
            obj_out[it] = ycost - 0.5 * s + lam * l1 + 0.5 * lam2 * l2
        if max_delta < tol:
            if not require_kkt:
                converged = True
                break
            kkt = 0.0
            for j in range(p):
                bj = b[j]
                if bj == 0.0:
                    v = abs(rho[j]) - lam
                else:
                    sign = 1.0 if bj > 0.0 else -1.0
                    v = abs(rho[j] - lam2 * bj - lam * sign)
                if v > kkt:
                    kkt = v
            if kkt <= 10.0 * tol:
                converged = True
                break
    return n_cycles, converged


if njit is not None:
    _cd_sweeps = njit(cache=True)(_cd_sweeps)


def _support_polish(G, c, lam, lam2, b):
    """Exact stationary point on the current support and sign pattern.

    Once the sweeps have stabilized the support, the restricted problem is
    a linear system; solving it lands on the orthant minimum with KKT
    residuals at rounding level.  Returns None when the solve leaves the
    orthant (support not settled yet).
    """
    active = np.flatnonzero(b)
    if active.size == 0:
        return np.zeros_like(b), c.copy()
    signs = np.sign(b[active])
    sub = G[np.ix_(active, active)]
    if lam2 > 0.0:
        sub = sub + lam2 * np.eye(active.size)
    rhs = c[active] - lam * signs
    try:
        coef = np.linalg.solve(sub, rhs)
    except np.linalg.LinAlgError:
        coef, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
    if lam > 0.0 and np.any(signs * coef < 0.0):
        return None
    out = np.zeros_like(b)
    out[active] = coef
    return out, c - G @ out


def gram_parts(X, y):
    """(G, c, ycost) = (X'X/n, X'y/n, ||y||^2/(2n)) for the Gram-form solver."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if y.shape != (n,):
        raise InputError(f"response must have length {n}, got shape {y.shape}")
    G = X.T @ X / n
    c = X.T @ y / n
    return np.ascontiguousarray(G), c, float(y @ y) / (2 * n)


# sweeps between polish attempts; the support usually settles long before
# the coefficient creep falls under tol
_POLISH_EVERY = 50


def _fit_gram(G, c, ycost, cfg: PenaltyConfig, warm=None, record_objective=False):
    p = G.shape[0]
    if warm is None:
        b = np.zeros(p)
        rho = c.copy()
    else:
        b = np.asarray(warm, dtype=np.float64).copy()
        rho = c - G @ b
    kkt_bound = 10.0 * cfg.tol
    obj_parts = []
    n_cycles = 0
    converged = False
    budget = cfg.max_iter
    while budget > 0:
        chunk = min(_POLISH_EVERY, budget)
        obj_k = np.empty(chunk if record_objective else 0)
        nk, converged = _cd_sweeps(
            G, c, cfg.lam, cfg.lam2, b, rho, chunk, cfg.tol,
            obj_k, record_objective, ycost, True,
        )
        if record_objective:
            obj_parts.append(obj_k[:nk])
        n_cycles += nk
        budget -= nk
        polished = _support_polish(G, c, cfg.lam, cfg.lam2, b)
        if polished is not None:
            pb, prho = polished
            if _kkt_residual(prho, pb, cfg.lam, cfg.lam2) <= kkt_bound:
                b, rho = pb, prho
                converged = True
        if converged:
            break
    if record_objective:
        obj = np.concatenate(obj_parts) if obj_parts else np.empty(0)
    return BaselineFit(
        coef=b,
        converged=bool(converged),
        n_cycles=int(n_cycles),
        kkt_residual=_kkt_residual(rho, b, cfg.lam, cfg.lam2),
        objective_path=obj if record_objective else None,
    )


def fit_enet(X, y, cfg: PenaltyConfig, warm=None, record_objective=False) -> BaselineFit:
    """Elastic-net fit by cyclic coordinate descent."""
    G, c, ycost = gram_parts(X, y)
    return _fit_gram(G, c, ycost, cfg, warm=warm, record_objective=record_objective)


def fit_lasso(X, y, cfg: PenaltyConfig, warm=None, record_objective=False) -> BaselineFit:
    """LASSO fit; requires cfg.lam2 == 0."""
    if cfg.lam2 != 0.0:
        raise InputError("fit_lasso requires lam2 == 0; use fit_enet instead")
    return fit_enet(X, y, cfg, warm=warm, record_objective=record_objective)


LAMBDA_GRID_SIZE = 50
LAMBDA_MIN_RATIO = 1e-3

# L2 weights swept by the elastic-net cross-validation (the L1 path is the
# default lambda grid below).
ENET_LAMBDA2_GRID_DEFAULT = (1e-2, 1e-1, 1.0)


def default_lambda_grid(X, y, size: int = LAMBDA_GRID_SIZE) -> tuple:
    """Descending log-spaced L1 path from lam_max = max_j |x_j'y| / n."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lam_max = float(np.max(np.abs(X.T @ y))) / X.shape[0]
    if lam_max <= 0.0:
        return (0.0,)
    return tuple(np.geomspace(lam_max, lam_max * LAMBDA_MIN_RATIO, size))


@dataclass(frozen=True)
class FoldAssignment:
    """Fold labels in {1..n_folds} with sizes differing by at most one."""

    fold_of: np.ndarray
    seed: int

    def __post_init__(self):
        self.fold_of.setflags(write=False)

    @property
    def n_folds(self) -> int:
        return int(self.fold_of.max())


def assign_folds(n: int, n_folds: int, seed: int, stream_index: int = 0) -> FoldAssignment:
    """Deterministic seeded fold assignment via a counter-based stream."""
    if n_folds < 2 or n_folds > n:
        raise InputError("need 2 <= n_folds <= n")
    gen = rng_stream(seed, PURPOSE_FOLDS, stream_index)
    labels = np.arange(n) % n_folds + 1
    return FoldAssignment(fold_of=gen.permutation(labels), seed=int(seed))


@dataclass(frozen=True)
class KFoldResult:
    """Selected penalty configuration plus the CV error surface.

    mean_errors[i, j] is the mean held-out squared error at
    (lambda_grid[i], lambda2_grid[j]); inf marks grid points excluded
    because a fold fit raised.  kkt_max tracks the worst KKT residual seen
    over every fold fit, for downstream optimality auditing.
    """

    config: PenaltyConfig
    mean_errors: np.ndarray
    folds: FoldAssignment
    kkt_max: float

    def __post_init__(self):
        self.mean_errors.setflags(write=False)


def tune_kfold(
    X,
    y,
    lambda_grid,
    lambda2_grid,
    seed: int,
    n_folds: int = 5,
    max_iter: int = PenaltyConfig.max_iter,
    tol: float = PenaltyConfig.tol,
    stream_index: int = 0,
    folds: FoldAssignment | None = None,
) -> KFoldResult:
    """K-fold selection of (lam, lam2) by mean held-out squared error.

    The lambda path is swept in the order given (descending recommended)
    with warm starts at each lam2.  Ties break to the earliest position in
    lambda_grid, then in lambda2_grid.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    lambda_grid = tuple(float(v) for v in lambda_grid)
    lambda2_grid = tuple(float(v) for v in lambda2_grid)
    if not lambda_grid or not lambda2_grid:
        raise InputError("penalty grids must be nonempty")
    if folds is None:
        folds = assign_folds(n, n_folds, seed, stream_index=stream_index)
    sse = np.zeros((len(lambda_grid), len(lambda2_grid)))
    excluded = np.zeros_like(sse, dtype=bool)
    kkt_max = 0.0
    for fold in range(1, folds.n_folds + 1):
        val = folds.fold_of == fold
        X_tr, y_tr = X[~val], y[~val]
        X_val, y_val = X[val], y[val]
        G, c, ycost = gram_parts(X_tr, y_tr)
        for j, lam2 in enumerate(lambda2_grid):
            warm = None
            for i, lam in enumerate(lambda_grid):
                cfg = PenaltyConfig(lam=lam, lam2=lam2, max_iter=max_iter, tol=tol)
                try:
                    fit = _fit_gram(G, c, ycost, cfg, warm=warm)
                except (FloatingPointError, ValueError):
                    excluded[i, j] = True
                    continue
                warm = fit.coef
                kkt_max = max(kkt_max, fit.kkt_residual)
                resid = y_val - X_val @ fit.coef
                sse[i, j] += float(resid @ resid)
    mean_errors = np.where(excluded, np.inf, sse / n)
    best = (0, 0)
    best_value = np.inf
    for i in range(len(lambda_grid)):
        for j in range(len(lambda2_grid)):
            if mean_errors[i, j] < best_value:
                best_value = mean_errors[i, j]
                best = (i, j)
    if not np.isfinite(best_value):
        raise InputError("every grid point failed in cross-validation")
    config = PenaltyConfig(
        lam=lambda_grid[best[0]],
        lam2=lambda2_grid[best[1]],
        max_iter=max_iter,
        tol=tol,
    )
    return KFoldResult(
        config=config, mean_errors=mean_errors, folds=folds, kkt_max=kkt_max
    )
