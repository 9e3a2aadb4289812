"""Simulation harness: end-to-end studies, rate checks and report files.

Per replication each estimator is tuned by its own protocol: the
thresholded ridge by the closed-form leave-one-out criterion over a
(C1, C2) grid, and ridge / LASSO / elastic net by 5-fold cross-validation.
The recorded statistic is the per-replication L2 error n^{-1} ||X beta -
X fit||^2 against the study's fixed design.

Replication-level parallelism uses worker processes; because every random
stream is keyed by (master seed, purpose, replication), reports are
bitwise identical at any worker count.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .baselines import (
    ENET_LAMBDA2_GRID_DEFAULT,
    FoldAssignment,
    assign_folds,
    default_lambda_grid,
    fit_enet,
    fit_lasso,
    tune_kfold,
)
from .errors import InputError
from .linalg import factorize
from .ridge import expected_l2_error, fit_ridge
from .simgen import (
    GeneratedInstance,
    StudyConfig,
    gen_noise,
    generate_instance,
)
from .threshold import (
    ScheduleParams,
    apply_threshold,
    regularization_value,
    selection_band_check,
    sparsity_profile,
    threshold_value,
    u_value,
)
from .tuning import TuningGrid, default_grid, tune

THRESHOLDED_RIDGE = "thresholded_ridge"
RIDGE = "ridge"
LASSO = "lasso"
ENET = "enet"
ALL_METHODS = (THRESHOLDED_RIDGE, RIDGE, LASSO, ENET)

RIDGE_H_GRID_SIZE = 50
RIDGE_H_SPAN = 1e3
N_FOLDS = 5

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class ReplicationResult:
    """One (method, replication) cell of a study.

    l2_error is n^{-1} ||X beta - X fit||^2.  selected_count and the band
    flags are filled for the thresholded ridge only; kkt_residual for the
    L1 baselines.  A failed cell records the error message and NaN.
    """

    method: str
    replication: int
    l2_error: float
    selected_count: int | None = None
    band_lower_ok: bool | None = None
    band_upper_ok: bool | None = None
    kkt_residual: float | None = None
    failure: str | None = None


@dataclass(frozen=True)
class StudyReport:
    config: StudyConfig
    methods: tuple
    results: tuple
    mean_l2: dict
    cumulative_proportion: np.ndarray
    metadata: dict

    def results_for(self, method: str) -> tuple:
        return tuple(r for r in self.results if r.method == method)


def cumulative_proportion(theta) -> np.ndarray:
    """Running normalized partial sums of the sorted squared components.

    Entry k-1 is sum of the k largest theta_j^2 divided by ||theta||^2;
    the final entry is exactly 1.
    """
    theta = np.asarray(theta, dtype=np.float64)
    partial = np.cumsum(np.sort(theta**2)[::-1])
    if partial[-1] <= 0.0:
        raise InputError("undefined proportion")
    return partial / partial[-1]


@dataclass(frozen=True)
class _StudyContext:
    cfg: StudyConfig
    inst: GeneratedInstance
    Xbeta: np.ndarray
    methods: tuple
    tuning_grid: TuningGrid | None


def _l2_error(Xbeta: np.ndarray, Xfit: np.ndarray) -> float:
    diff = Xbeta - Xfit
    return float(diff @ diff) / Xbeta.shape[0]


def _run_thresholded(ctx: _StudyContext, y: np.ndarray, rep: int) -> ReplicationResult:
    inst = ctx.inst
    F = inst.factors
    grid = ctx.tuning_grid if ctx.tuning_grid is not None else default_grid(y, F.n, F.p)
    cv = tune(F, y, grid)
    sched = ScheduleParams(c1=cv.best_c1, alpha=grid.alpha, c2=cv.best_c2)
    a = threshold_value(F.n, sched)
    h = regularization_value(F.n, F.p, sched)
    tfit = apply_threshold(fit_ridge(F, y, h), a)
    profile = sparsity_profile(inst.theta, F.n, a)
    band = selection_band_check(inst.theta, tfit, profile)
    return ReplicationResult(
        method=THRESHOLDED_RIDGE,
        replication=rep,
        l2_error=_l2_error(ctx.Xbeta, inst.X @ tfit.theta_tilde),
        selected_count=int(tfit.selected.size),
        band_lower_ok=band.lower_ok,
        band_upper_ok=band.upper_ok,
    )


def _tune_ridge_kfold(X, y, lam_max: float, folds: FoldAssignment,
                      grid_size: int = RIDGE_H_GRID_SIZE) -> float:
    """5-fold CV for the ridge penalty over a log grid around lambda_max."""
    h_grid = np.geomspace(lam_max / RIDGE_H_SPAN, lam_max * RIDGE_H_SPAN, grid_size)
    sse = np.zeros(grid_size)
    for fold in range(1, folds.n_folds + 1):
        val = folds.fold_of == fold
        Ff = factorize(X[~val])
        z = Ff.P.T @ y[~val]
        A = X[val] @ Ff.Q
        d2 = Ff.d**2
        for idx, h in enumerate(h_grid):
            pred = A @ (Ff.d * z / (d2 + h))
            resid = y[val] - pred
            sse[idx] += float(resid @ resid)
    return float(h_grid[int(np.argmin(sse))])


def _run_ridge(ctx: _StudyContext, y, rep: int, folds: FoldAssignment) -> ReplicationResult:
    inst = ctx.inst
    F = inst.factors
    h = _tune_ridge_kfold(inst.X, y, float(F.d[0] ** 2), folds)
    fit = fit_ridge(F, y, h)
    return ReplicationResult(
        method=RIDGE,
        replication=rep,
        l2_error=_l2_error(ctx.Xbeta, inst.X @ fit.theta_hat),
    )


def _run_l1(ctx: _StudyContext, y, rep: int, folds: FoldAssignment,
            method: str) -> ReplicationResult:
    inst = ctx.inst
    lam_grid = default_lambda_grid(inst.X, y)
    lam2_grid = (0.0,) if method == LASSO else ENET_LAMBDA2_GRID_DEFAULT
    res = tune_kfold(
        inst.X, y, lam_grid, lam2_grid, seed=ctx.cfg.master_seed, folds=folds
    )
    fitter = fit_lasso if method == LASSO else fit_enet
    final = fitter(inst.X, y, res.config)
    return ReplicationResult(
        method=method,
        replication=rep,
        l2_error=_l2_error(ctx.Xbeta, inst.X @ final.coef),
        kkt_residual=max(res.kkt_max, final.kkt_residual),
    )


def _replicate(ctx: _StudyContext, rep: int) -> list[ReplicationResult]:
    cfg = ctx.cfg
    y = ctx.Xbeta + gen_noise(cfg.n, cfg.sigma, cfg.master_seed, rep)
    folds = None
    if any(m in ctx.methods for m in (RIDGE, LASSO, ENET)):
        folds = assign_folds(cfg.n, N_FOLDS, cfg.master_seed, stream_index=rep)
    out = []
    for method in ctx.methods:
        try:
            if method == THRESHOLDED_RIDGE:
                out.append(_run_thresholded(ctx, y, rep))
            elif method == RIDGE:
                out.append(_run_ridge(ctx, y, rep, folds))
            else:
                out.append(_run_l1(ctx, y, rep, folds, method))
        except Exception as exc:  # cell-level failure, study continues
            out.append(
                ReplicationResult(
                    method=method,
                    replication=rep,
                    l2_error=float("nan"),
                    failure=f"{type(exc).__name__}: {exc}",
                )
            )
    return out


_WORKER_CTX: _StudyContext | None = None


def _init_worker(ctx: _StudyContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker_task(rep: int) -> list[ReplicationResult]:
    return _replicate(_WORKER_CTX, rep)


def run_study(
    cfg: StudyConfig,
    methods=ALL_METHODS,
    workers: int = 1,
    tuning_grid: TuningGrid | None = None,
) -> StudyReport:
    """Run every replication of a study and aggregate the results.

    The design is generated once and fixed; replications differ only in
    their noise stream.  Worker count does not affect the results.
    """
    unknown = set(methods) - set(ALL_METHODS)
    if unknown:
        raise InputError(f"unknown methods: {sorted(unknown)}")
    methods = tuple(m for m in ALL_METHODS if m in set(methods))
    inst = generate_instance(cfg)
    ctx = _StudyContext(
        cfg=cfg,
        inst=inst,
        Xbeta=inst.X @ inst.beta,
        methods=methods,
        tuning_grid=tuning_grid,
    )
    reps = range(cfg.replications)
    if workers <= 1:
        rows = [_replicate(ctx, rep) for rep in reps]
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(ctx,)
        ) as pool:
            rows = list(pool.map(_worker_task, reps))
    results = tuple(r for row in rows for r in row)
    mean_l2 = {
        m: float(np.mean([r.l2_error for r in results if r.method == m]))
        for m in methods
    }
    return StudyReport(
        config=cfg,
        methods=methods,
        results=results,
        mean_l2=mean_l2,
        cumulative_proportion=cumulative_proportion(inst.theta),
        metadata=dict(inst.metadata),
    )


# ---------------------------------------------------------------------------
# report files


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _FLOAT_FMT % value
    return str(value)


def emit_report(report: StudyReport, out_dir) -> dict:
    """Write the table, per-replication CSV, proportion curve and manifest.

    All numbers carry 17 significant digits; the manifest holds everything
    needed to reproduce the run.  Returns {file kind: path}.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    cfg = report.config
    table = out / "study_table.txt"
    headers = ["study", "n", "p"] + list(report.methods)
    row = [cfg.study, str(cfg.n), str(cfg.p)] + [
        _cell(report.mean_l2[m]) for m in report.methods
    ]
    widths = [max(len(h), len(v)) for h, v in zip(headers, row)]
    with open(table, "w", encoding="utf-8") as fh:
        fh.write("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip() + "\n")
        fh.write("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() + "\n")
    paths["table"] = table

    means = out / "method_means.csv"
    with open(means, "w", encoding="utf-8") as fh:
        fh.write("study,n,p,method,mean_l2_error\n")
        for m in report.methods:
            fh.write(f"{cfg.study},{cfg.n},{cfg.p},{m},{_cell(report.mean_l2[m])}\n")
    paths["means"] = means

    repl = out / "replications.csv"
    with open(repl, "w", encoding="utf-8") as fh:
        fh.write(
            "method,replication,l2_error,selected_count,"
            "band_lower_ok,band_upper_ok,kkt_residual,failure\n"
        )
        for r in report.results:
            fh.write(
                ",".join(
                    _cell(v)
                    for v in (
                        r.method,
                        r.replication,
                        r.l2_error,
                        r.selected_count,
                        r.band_lower_ok,
                        r.band_upper_ok,
                        r.kkt_residual,
                        r.failure,
                    )
                )
                + "\n"
            )
    paths["replications"] = repl

    curve = out / "cumulative_proportion.tsv"
    with open(curve, "w", encoding="utf-8") as fh:
        fh.write("k\tcumulative_proportion\n")
        for k, v in enumerate(report.cumulative_proportion, start=1):
            fh.write(f"{k}\t{_FLOAT_FMT % v}\n")
    paths["curve"] = curve

    manifest = out / "manifest.json"
    payload = {
        "config": cfg.to_dict(),
        "methods": list(report.methods),
        "mean_l2": report.mean_l2,
        "metadata": report.metadata,
        "versions": {"projridge": __version__, "numpy": np.__version__},
    }
    with open(manifest, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["manifest"] = manifest
    return paths


def rerun_manifest(path, workers: int = 1) -> StudyReport:
    """Re-run the study recorded in a manifest file."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    cfg = StudyConfig.from_dict(payload["config"])
    return run_study(cfg, methods=tuple(payload["methods"]), workers=workers)


# ---------------------------------------------------------------------------
# rate checks


@dataclass(frozen=True)
class RateCheckReport:
    """Observed expected-L2 errors across n and their log-log slopes."""

    theorem: str
    scenario: str
    n_values: tuple
    errors: dict
    stderrs: dict
    slopes: dict
    prediction: dict

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "scenario": self.scenario,
            "n_values": list(self.n_values),
            "errors": {k: list(v) for k, v in self.errors.items()},
            "stderrs": {k: list(v) for k, v in self.stderrs.items()},
            "slopes": self.slopes,
            "prediction": self.prediction,
        }


def _orthogonal_flat_instance(n: int):
    """Scaled identity design, unit-norm one-spike signal, small fixed h."""
    X = np.sqrt(float(n)) * np.eye(n)
    theta = np.zeros(n)
    theta[0] = 1.0
    return X, theta, 1.0, 0.01


def _bounded_q_instance(n: int):
    """Duplicated-identity design (p = 2n): the projection spreads a
    5-spike signal over 10 components of size 0.5, so the large set stays
    bounded while the rank grows like n."""
    p = 2 * n
    X = np.sqrt(n / 2.0) * np.hstack([np.eye(n), np.eye(n)])
    beta = np.zeros(p)
    beta[:5] = 1.0
    sched = ScheduleParams(c1=0.3, alpha=0.25, c2=1e-4)
    return X, beta, 0.25, sched


RATE_SCENARIOS = {
    "orthogonal_flat": _orthogonal_flat_instance,
    "bounded_q": _bounded_q_instance,
}

T3_SLOPE_MARGIN = 0.3


def _loglog_slope(n_values, errors) -> float:
    return float(np.polyfit(np.log(np.asarray(n_values, float)),
                            np.log(np.asarray(errors, float)), 1)[0])


def rate_check(
    theorem: str,
    scenario: str,
    n_values=(100, 200, 400, 800),
    master_seed: int = 0,
    replications: int = 500,
) -> RateCheckReport:
    """Scaling experiment for the ridge / thresholded-ridge error rates.

    theorem 't1ii' evaluates the exact ridge expected L2 error on the
    scenario and reports its log-log slope (predicted flat when the rank
    grows like n).  theorem 't3' additionally estimates the thresholded
    ridge error by Monte Carlo and reports both slopes; the thresholded
    slope is predicted to undercut the ridge slope by at least the margin.
    """
    n_values = tuple(int(v) for v in n_values)
    if len(n_values) < 4 or any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise InputError("need at least 4 strictly ascending n values")
    if scenario not in RATE_SCENARIOS:
        raise InputError(f"unknown scenario {scenario!r}")
    if theorem not in ("t1ii", "t3"):
        raise InputError(f"unknown theorem {theorem!r}")
    build = RATE_SCENARIOS[scenario]

    errors: dict = {}
    stderrs: dict = {}
    if theorem == "t1ii":
        if scenario != "orthogonal_flat":
            raise InputError("theorem t1ii expects the 'orthogonal_flat' scenario")
        ridge_err = []
        for n in n_values:
            X, theta, sigma, h = build(n)
            F = factorize(X)
            if float(np.linalg.norm(theta)) == 0.0:
                raise InputError("degenerate scenario: theta is zero")
            ridge_err.append(expected_l2_error(F, theta, h, sigma))
        errors["ridge"] = tuple(ridge_err)
        stderrs["ridge"] = ()
        slopes = {"ridge": _loglog_slope(n_values, ridge_err)}
        prediction = {"ridge_slope": 0.0, "tolerance": 0.1}
        return RateCheckReport(
            theorem=theorem, scenario=scenario, n_values=n_values,
            errors=errors, stderrs=stderrs, slopes=slopes, prediction=prediction,
        )

    if scenario != "bounded_q":
        raise InputError("theorem t3 expects the 'bounded_q' scenario")
    if replications < 500:
        raise InputError("theorem t3 requires at least 500 replications")
    ridge_err = []
    thres_err = []
    thres_se = []
    for n_index, n in enumerate(n_values):
        X, beta, sigma, sched = build(n)
        F = factorize(X)
        theta = F.Q @ (F.Q.T @ beta)
        if float(np.linalg.norm(theta)) == 0.0:
            raise InputError("degenerate scenario: theta is zero")
        a = threshold_value(n, sched)
        h = regularization_value(n, F.p, sched)
        ridge_err.append(expected_l2_error(F, theta, h, sigma))
        noise = np.empty((n, replications))
        for rep in range(replications):
            noise[:, rep] = gen_noise(
                n, sigma, master_seed, n_index * replications + rep
            )
        Y = (X @ theta)[:, None] + noise
        d2 = F.d**2
        coefs = (F.d / (d2 + h))[:, None] * (F.P.T @ Y)
        theta_hat = F.Q @ coefs
        theta_tilde = np.where(np.abs(theta_hat) > a, theta_hat, 0.0)
        diff = X @ theta_tilde - (X @ theta)[:, None]
        per_rep = np.sum(diff**2, axis=0) / n
        thres_err.append(float(np.mean(per_rep)))
        thres_se.append(float(np.std(per_rep, ddof=1) / np.sqrt(replications)))
    errors = {"ridge": tuple(ridge_err), "thresholded_ridge": tuple(thres_err)}
    stderrs = {"ridge": (), "thresholded_ridge": tuple(thres_se)}
    slopes = {
        "ridge": _loglog_slope(n_values, ridge_err),
        "thresholded_ridge": _loglog_slope(n_values, thres_err),
    }
    prediction = {
        "margin": T3_SLOPE_MARGIN,
        "margin_met": bool(
            slopes["thresholded_ridge"] <= slopes["ridge"] - T3_SLOPE_MARGIN
        ),
    }
    return RateCheckReport(
        theorem=theorem, scenario=scenario, n_values=n_values,
        errors=errors, stderrs=stderrs, slopes=slopes, prediction=prediction,
    )


# ---------------------------------------------------------------------------
# selection-band experiment


@dataclass(frozen=True)
class SelectionBandResult:
    """Monte-Carlo frequency of the two-sided selection band event."""

    frequency: float
    lower_ok: tuple
    upper_ok: tuple
    selected_sets: tuple
    theta: np.ndarray
    schedule: ScheduleParams
    a: float
    h: float
    sigma: float


def selection_band_instance(n: int = 200, p: int = 1000):
    """Well-separated preset: axis-aligned design, 10 components at 0.5,
    20 at 0.02, everything else exactly zero."""
    X = np.zeros((n, p))
    X[:, :n] = np.sqrt(float(n)) * np.eye(n)
    theta = np.zeros(p)
    theta[:10] = 0.5
    theta[10:30] = 0.02
    sched = ScheduleParams(c1=1.0, alpha=0.5, c2=1e-3)
    return X, theta, 0.1, sched


def selection_band_experiment(
    replications: int = 200,
    master_seed: int = 2026,
    n: int = 200,
    p: int = 1000,
) -> SelectionBandResult:
    """Frequency of the band event over replications of the preset.

    The preset satisfies the separation conditions: the small-set maximum
    is below a_n/(2 u_n) and the large-set minimum above 2 a_n u_n.
    """
    X, theta, sigma, sched = selection_band_instance(n, p)
    F = factorize(X)
    a = threshold_value(n, sched)
    h = regularization_value(n, p, sched)
    u = u_value(n)
    mags = np.abs(theta)
    large = mags[mags > a * u]
    small = mags[(mags > 0) & (mags <= a * u)]
    if large.size and large.min() < 2 * a * u:
        raise InputError("preset violates the large-set separation condition")
    if small.size and small.max() > a / (2 * u):
        raise InputError("preset violates the small-set separation condition")
    profile = sparsity_profile(theta, n, a)
    Xtheta = X @ theta
    lower, upper, selected_sets = [], [], []
    for rep in range(replications):
        y = Xtheta + gen_noise(n, sigma, master_seed, rep)
        tfit = apply_threshold(fit_ridge(F, y, h), a)
        band = selection_band_check(theta, tfit, profile)
        lower.append(band.lower_ok)
        upper.append(band.upper_ok)
        selected_sets.append(tfit.selected)
    both = np.logical_and(lower, upper)
    return SelectionBandResult(
        frequency=float(np.mean(both)),
        lower_ok=tuple(lower),
        upper_ok=tuple(upper),
        selected_sets=tuple(selected_sets),
        theta=theta,
        schedule=sched,
        a=a,
        h=h,
        sigma=sigma,
    )
