"""Monte Carlo phase estimation with two-mode squeezed vacuum and parity readout."""

__version__ = "0.1.0"

from .analysis import (
    ClassificationRule,
    EnsembleConfig,
    EnsembleTemplate,
    EstimateEnsemble,
    IntervalVerdict,
    ScalingFit,
    classify_interval,
    fit_scaling,
    run_ensemble,
    scaling_analysis,
    scan_bias,
    scan_intensity,
)
from .fock_oracle import (
    PhotonCountDistribution,
    even_probability_via_fock,
    photon_count_distribution,
    wigner_d,
)
from .inference import (
    LikelihoodTable,
    PhaseEstimate,
    PhaseGrid,
    Posterior,
    build_likelihood_table,
    credible_interval,
    map_estimate,
    posterior,
)
from .model import (
    SensitivityBounds,
    SingularBoundError,
    TmsvSource,
    crb_sensitivity,
    even_probability,
    heisenberg_c,
    odd_probability,
    parity_expectation,
    sensitivity_bounds,
    shot_noise_c,
    single_shot_variance,
    twin_fock_weight,
)
from .simulate import (
    ConvergenceTrace,
    MeasurementRecord,
    RecordConfig,
    derive_seed,
    draw_record,
    parity_trace,
)

__all__ = [
    "__version__",
    "ClassificationRule",
    "ConvergenceTrace",
    "EnsembleConfig",
    "EnsembleTemplate",
    "EstimateEnsemble",
    "IntervalVerdict",
    "LikelihoodTable",
    "MeasurementRecord",
    "PhaseEstimate",
    "PhaseGrid",
    "PhotonCountDistribution",
    "Posterior",
    "RecordConfig",
    "ScalingFit",
    "SensitivityBounds",
    "SingularBoundError",
    "TmsvSource",
    "build_likelihood_table",
    "classify_interval",
    "credible_interval",
    "crb_sensitivity",
    "derive_seed",
    "draw_record",
    "even_probability",
    "even_probability_via_fock",
    "fit_scaling",
    "heisenberg_c",
    "map_estimate",
    "odd_probability",
    "parity_expectation",
    "parity_trace",
    "photon_count_distribution",
    "posterior",
    "run_ensemble",
    "scaling_analysis",
    "scan_bias",
    "scan_intensity",
    "sensitivity_bounds",
    "shot_noise_c",
    "single_shot_variance",
    "twin_fock_weight",
    "wigner_d",
]
