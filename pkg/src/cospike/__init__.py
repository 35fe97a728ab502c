"""Compressed sensing of neural spike frames with co-sparse analysis priors.

Spike frames measured through random Bernoulli projections are reconstructed
by weighted analysis l1-minimization over stacked fractional-order difference
dictionaries; per-order weights come from a trained Laplacian variance prior.
"""

from .errors import (
    ClusterCountError,
    ConfigError,
    CospikeError,
    DegenerateSigmaError,
    InvalidOrderError,
    InvalidOrderSetError,
    ParseError,
    ShapeError,
    UnderdeterminedFitError,
    ZeroReferenceError,
)
from .experiments import (
    ExperimentConfig,
    apply_overrides,
    derive_seed,
    fit_prior,
    parse_flat_config,
    run_classification,
    run_co_sparsity,
    run_sweep,
    run_training,
)
from .fracdiff import (
    AnalysisDictionary,
    DifferenceCoefficients,
    apply_analysis,
    build_mfod,
    build_random_tight_frame,
    difference_matrix,
    fod_coefficients,
    order_distance,
)
from .io import load_matrix, load_measurements, save_matrix, save_measurements
from .metrics import (
    GOOD_PRD_THRESHOLD,
    ClassificationReport,
    PCAModel,
    ReconstructionReport,
    classification_accuracy,
    co_sparsity,
    good_probability,
    haar_features,
    kmeans_classify,
    pca_features,
    pca_fit,
    prd,
)
from .prior import (
    OrderVarianceModel,
    WeightVector,
    build_weights,
    estimate_order_sigma,
    fit_variance_model,
    load_model,
    save_model,
)
from .sensing import MeasurementVector, SensingMatrix, bernoulli_matrix, measure
from .solver import (
    OptimalityReport,
    SolverConfig,
    SolverResult,
    optimality_report,
    resolve_lambda,
    solve_al1,
    solve_al1_batch,
    solve_walm,
    solve_walm_batch,
)
from .spikes import (
    DEFAULT_FRAME_LENGTH,
    DEFAULT_PRE_PEAK,
    Dataset,
    RawTrace,
    SpikeFrame,
    detect_spikes,
    load_dataset,
    save_dataset,
    synthesize_dataset,
    synthesize_trace,
)

__version__ = "0.1.0"
