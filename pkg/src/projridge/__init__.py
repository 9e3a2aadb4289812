"""Projection-ridge estimation for high-dimensional linear models.

When the design matrix is deterministic and p exceeds its rank, only the
projection of the coefficient vector onto the row space of the design is
identifiable.  This package estimates that projection by dual-form ridge
regression, improves it by hard thresholding with schedule-driven tuning
constants chosen through a closed-form leave-one-out criterion, and ships
a seeded simulation harness with LASSO/elastic-net baselines.
"""

from ._version import __version__
from .baselines import (
    BaselineFit,
    FoldAssignment,
    KFoldResult,
    PenaltyConfig,
    assign_folds,
    default_lambda_grid,
    fit_enet,
    fit_lasso,
    tune_kfold,
)
from .errors import InputError, NumericalError
from .harness import (
    ALL_METHODS,
    RateCheckReport,
    ReplicationResult,
    SelectionBandResult,
    StudyReport,
    cumulative_proportion,
    emit_report,
    rate_check,
    rerun_manifest,
    run_study,
    selection_band_experiment,
)
from .linalg import (
    SpectralDiagnostics,
    SvdFactorization,
    factorize,
    in_row_space,
    nonidentifiable_pair,
    null_direction,
    project,
    spectral_diagnostics,
)
from .matrixio import load_matrix_csv, load_vector_csv, save_matrix_csv, save_vector_csv
from .ridge import (
    BiasVarianceOracle,
    RidgeFit,
    bias_variance_oracle,
    expected_l2_error,
    fit_ridge,
    prediction_mse,
)
from .simgen import (
    GeneratedInstance,
    StudyConfig,
    gen_banded,
    gen_equicorrelated,
    gen_latin_hypercube,
    gen_noise,
    generate_instance,
    load_design_csv,
    make_beta,
    rng_stream,
    study_preset,
)
from .threshold import (
    BandCheck,
    ScheduleParams,
    SparsityProfile,
    ThresholdedFit,
    apply_threshold,
    index_set,
    regularization_value,
    selection_band_check,
    sparsity_profile,
    threshold_value,
    u_value,
)
from .tuning import (
    CvResult,
    TuningGrid,
    default_grid,
    loocv_criterion,
    psi_hat,
    psi_hat_at,
    tune,
)

__all__ = [name for name in dir() if not name.startswith("_")]
