"""Deterministic, seeded generation of simulation designs, signals and noise.

Reproducibility contract: every random quantity comes from a counter-based
Philox stream keyed by (master seed, stream purpose, stream index), so
replications can be generated in any order, in any number of workers, with
bitwise-identical results.  Gaussian variates are produced by inverse-CDF
of 53-bit uniforms rather than rejection sampling, which keeps the draws
reproducible across platforms.

Study presets:

    I   equicorrelated Gaussian rows (pairwise correlation 0.75), sigma 10,
        signal on the first 20 coordinates (1.1, 1.2, ..., 3.0).
    II  same signal and sigma, banded row covariance 0.5^|k-l| truncated
        beyond lag 10.
    III nearly orthogonal Latin hypercube designs loaded from fixture CSV
        files (49x96, 64x192), sigma 8, signal 0.2, 0.4, ..., 3.0 on the
        first 15 coordinates.  If the fixture file is absent, a plain
        Latin hypercube of the same shape is substituted and the report is
        labeled accordingly.
    IV  Latin hypercube columns over the grid 6*(i/n) - 3, signal and
        sigma as in study I.

Indices in beta_spec are 0-based.
"""

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .errors import InputError
from .linalg import SvdFactorization, as_design, factorize, project
from .matrixio import load_matrix_csv

_MASK48 = (1 << 48) - 1
_MASK64 = (1 << 64) - 1

PURPOSE_DESIGN = 1
PURPOSE_NOISE = 2
PURPOSE_FOLDS = 3


def rng_stream(master_seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (master seed, purpose, index)."""
    key = ((master_seed & _MASK64) << 64) | ((purpose & 0xFFFF) << 48) | (index & _MASK48)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normal(gen: np.random.Generator, size) -> np.ndarray:
    """N(0,1) draws via inverse CDF of 53-bit uniforms on the stream."""
    u = gen.integers(0, 1 << 53, size=size, dtype=np.uint64).astype(np.float64)
    return ndtri((u + 0.5) * 2.0**-53)


def gen_equicorrelated(n: int, p: int, rho: float, seed: int) -> np.ndarray:
    """Rows i.i.d. N(0, (1-rho) I + rho J) via the one-factor representation
    x = sqrt(rho) z0 1 + sqrt(1-rho) z."""
    if not 0.0 <= rho < 1.0:
        raise InputError("rho must lie in [0, 1)")
    gen = rng_stream(seed, PURPOSE_DESIGN)
    z0 = standard_normal(gen, (n, 1))
    z = standard_normal(gen, (n, p))
    return math.sqrt(rho) * z0 + math.sqrt(1.0 - rho) * z


def banded_covariance(p: int, base: float, band: int) -> np.ndarray:
    """Sigma[k, l] = base^|k-l| for |k-l| <= band, 0 beyond the band."""
    if not abs(base) < 1.0:
        raise InputError("base must satisfy |base| < 1")
    if band < 0:
        raise InputError("band must be nonnegative")
    lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    return np.where(lag <= band, float(base) ** lag, 0.0)


def banded_root(p: int, base: float, band: int) -> tuple[np.ndarray, float]:
    """Symmetric square root of the banded covariance.

    The truncated geometric covariance is not guaranteed positive
    semidefinite; negative eigenvalues are clipped at zero and the largest
    clipped magnitude is returned alongside the root.
    """
    cov = banded_covariance(p, base, band)
    evals, vecs = np.linalg.eigh(cov)
    max_clip = float(max(0.0, -float(evals.min())))
    root = (vecs * np.sqrt(np.maximum(evals, 0.0))) @ vecs.T
    return root, max_clip


def _clip_tolerance(p: int, max_eval: float) -> float:
    return p * float(np.finfo(np.float64).eps) * max(1.0, max_eval)


def _banded_sample(n, p, base, band, seed) -> tuple[np.ndarray, float]:
    root, max_clip = banded_root(p, base, band)
    gen = rng_stream(seed, PURPOSE_DESIGN)
    z = standard_normal(gen, (n, p))
    return z @ root, max_clip


def gen_banded(n: int, p: int, base: float, band: int, seed: int) -> np.ndarray:
    """Rows i.i.d. Gaussian with banded covariance (see banded_root)."""
    X, max_clip = _banded_sample(n, p, base, band, seed)
    if max_clip > _clip_tolerance(p, 1.0 + abs(base) * min(band, p)):
        warnings.warn(
            f"banded covariance clipped at magnitude {max_clip:.3e}; "
            "sampling from its nearest PSD approximation",
            UserWarning,
            stacklevel=2,
        )
    return X


def gen_latin_hypercube(n: int, p: int, seed: int) -> np.ndarray:
    """Each column an independent uniform permutation of 6*(i/n) - 3, i=1..n."""
    if n < 2:
        raise InputError("latin hypercube needs n >= 2")
    gen = rng_stream(seed, PURPOSE_DESIGN)
    points = 6.0 * np.arange(1, n + 1) / n - 3.0
    return gen.permuted(np.tile(points, (p, 1)), axis=1).T


def load_design_csv(path) -> np.ndarray:
    """Load a design matrix verbatim from headerless CSV."""
    return as_design(load_matrix_csv(path))


def make_beta(p: int, spec) -> np.ndarray:
    """Coefficient vector with the given (index, value) nonzeros, 0-based."""
    beta = np.zeros(p)
    seen = set()
    for index, value in spec:
        index = int(index)
        if not 0 <= index < p:
            raise InputError(f"beta index {index} outside 0..{p - 1}")
        if index in seen:
            raise InputError(f"duplicate beta index {index}")
        seen.add(index)
        beta[index] = float(value)
    return beta


def gen_noise(n: int, sigma: float, master_seed: int, replication: int) -> np.ndarray:
    """i.i.d. N(0, sigma^2) noise from the (master seed, replication) stream."""
    if not sigma > 0:
        raise InputError("sigma must be positive")
    gen = rng_stream(master_seed, PURPOSE_NOISE, replication)
    return sigma * standard_normal(gen, n)


_DESIGN_KINDS = ("equicorrelated", "banded", "latin_hypercube", "csv", "nolh_fixture")

STUDY_SIZES = {
    "I": ((30, 100), (100, 500), (200, 2000)),
    "II": ((30, 100), (100, 500), (200, 2000)),
    "III": ((49, 96), (64, 192)),
    "IV": ((30, 100), (100, 500), (200, 2000)),
}

_CONFIG_KEYS = (
    "study", "n", "p", "sigma", "beta_spec", "design_source",
    "master_seed", "replications",
)


@dataclass(frozen=True)
class StudyConfig:
    """Declarative description of one simulation study."""

    study: str
    n: int
    p: int
    sigma: float
    beta_spec: tuple
    design_source: dict
    master_seed: int
    replications: int

    def __post_init__(self):
        if self.study not in ("I", "II", "III", "IV", "custom"):
            raise InputError(f"unknown study {self.study!r}")
        if self.n < 1 or self.p < 1:
            raise InputError("n and p must be positive")
        if not self.sigma > 0:
            raise InputError("sigma must be positive")
        if self.replications < 1:
            raise InputError("replications must be positive")
        kind = self.design_source.get("kind")
        if kind not in _DESIGN_KINDS:
            raise InputError(f"unknown design kind {kind!r}")

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "n": self.n,
            "p": self.p,
            "sigma": self.sigma,
            "beta_spec": [[int(i), float(v)] for i, v in self.beta_spec],
            "design_source": dict(self.design_source),
            "master_seed": self.master_seed,
            "replications": self.replications,
        }

    @staticmethod
    def from_dict(d: dict) -> "StudyConfig":
        unknown = set(d) - set(_CONFIG_KEYS)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        missing = set(_CONFIG_KEYS) - set(d)
        if missing:
            raise InputError(f"missing config keys: {sorted(missing)}")
        return StudyConfig(
            study=str(d["study"]),
            n=int(d["n"]),
            p=int(d["p"]),
            sigma=float(d["sigma"]),
            beta_spec=tuple((int(i), float(v)) for i, v in d["beta_spec"]),
            design_source=dict(d["design_source"]),
            master_seed=int(d["master_seed"]),
            replications=int(d["replications"]),
        )


def _preset_beta(study: str) -> tuple:
    if study in ("I", "II", "IV"):
        return tuple((j, 1.0 + 0.1 * (j + 1)) for j in range(20))
    if study == "III":
        return tuple((j, 0.2 * (j + 1)) for j in range(15))
    raise InputError(f"study {study!r} has no preset signal")


def study_preset(
    study: str,
    n: int,
    p: int,
    master_seed: int,
    replications: int = 100,
    fixtures_dir: str = "fixtures",
) -> StudyConfig:
    """Pinned configuration for one of the four shipped studies."""
    if study not in STUDY_SIZES:
        raise InputError(f"unknown study preset {study!r}")
    if (n, p) not in STUDY_SIZES[study]:
        raise InputError(
            f"study {study} is defined for (n, p) in {STUDY_SIZES[study]}, "
            f"got ({n}, {p})"
        )
    if study == "I":
        design = {"kind": "equicorrelated", "rho": 0.75}
    elif study == "II":
        design = {"kind": "banded", "base": 0.5, "band": 10}
    elif study == "III":
        design = {
            "kind": "nolh_fixture",
            "path": str(Path(fixtures_dir) / f"nolh_{n}_{p}.csv"),
        }
    else:
        design = {"kind": "latin_hypercube"}
    return StudyConfig(
        study=study,
        n=n,
        p=p,
        sigma=8.0 if study == "III" else 10.0,
        beta_spec=_preset_beta(study),
        design_source=design,
        master_seed=int(master_seed),
        replications=int(replications),
    )


def config_from_json_dict(d: dict, study: str | None = None,
                          fixtures_dir: str = "fixtures") -> StudyConfig:
    """Build a StudyConfig from a parsed JSON config file.

    Preset studies take only (n, p, master_seed, replications); sigma,
    beta_spec and design_source are pinned by the preset and may not be
    overridden.  study='custom' requires the full field set.
    """
    d = dict(d)
    file_study = d.pop("study", None)
    if study is None:
        study = file_study
    elif file_study is not None and file_study != study:
        raise InputError(
            f"config file says study {file_study!r} but {study!r} was requested"
        )
    if study is None:
        raise InputError("no study given (flag or config key required)")
    if study == "custom":
        return StudyConfig.from_dict({"study": "custom", **d})
    pinned = {"sigma", "beta_spec", "design_source"} & set(d)
    if pinned:
        raise InputError(
            f"study {study} pins {sorted(pinned)}; use study='custom' to override"
        )
    required = {"n", "p", "master_seed", "replications"}
    missing = required - set(d)
    if missing:
        raise InputError(f"missing config keys: {sorted(missing)}")
    unknown = set(d) - required
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return study_preset(
        study, int(d["n"]), int(d["p"]), int(d["master_seed"]),
        int(d["replications"]), fixtures_dir=fixtures_dir,
    )


@dataclass(frozen=True)
class GeneratedInstance:
    """One study's fixed design, signal and derived projection.

    The design (and hence theta) is generated once per study and shared by
    every replication; only the noise varies across replications.
    """

    X: np.ndarray
    factors: SvdFactorization
    beta: np.ndarray
    theta: np.ndarray
    sigma: float
    metadata: dict

    def __post_init__(self):
        self.X.setflags(write=False)
        self.beta.setflags(write=False)
        self.theta.setflags(write=False)


def generate_instance(cfg: StudyConfig) -> GeneratedInstance:
    """Materialize the design for a config and project its signal."""
    source = cfg.design_source
    kind = source["kind"]
    metadata: dict = {}
    if kind == "equicorrelated":
        X = gen_equicorrelated(cfg.n, cfg.p, float(source["rho"]), cfg.master_seed)
    elif kind == "banded":
        X, max_clip = _banded_sample(
            cfg.n, cfg.p, float(source["base"]), int(source["band"]), cfg.master_seed
        )
        metadata["covariance_max_clip"] = max_clip
        metadata["covariance_clip_warning"] = bool(
            max_clip > _clip_tolerance(cfg.p, 1.0 + abs(float(source["base"])))
        )
    elif kind == "latin_hypercube":
        X = gen_latin_hypercube(cfg.n, cfg.p, cfg.master_seed)
    elif kind == "csv":
        X = load_design_csv(source["path"])
    elif kind == "nolh_fixture":
        path = Path(source["path"])
        if path.exists():
            X = load_design_csv(path)
            metadata["design_file"] = str(path)
        else:
            X = gen_latin_hypercube(cfg.n, cfg.p, cfg.master_seed)
            metadata["design_substituted"] = "latin_hypercube"
    else:  # pragma: no cover - guarded by StudyConfig validation
        raise InputError(f"unknown design kind {kind!r}")
    if X.shape != (cfg.n, cfg.p):
        raise InputError(
            f"design has shape {X.shape}, config says ({cfg.n}, {cfg.p})"
        )
    F = factorize(X)
    beta = make_beta(cfg.p, cfg.beta_spec)
    theta = project(beta, F)
    return GeneratedInstance(
        X=X, factors=F, beta=beta, theta=theta, sigma=cfg.sigma, metadata=metadata
    )
