"""alphaadv: perturbation intensities with a chosen expected miss rate.

Fit a binary logistic regression, estimate the asymptotic covariance of its
coefficients, and scale an adversarial perturbation so that a defender model
of the same family, trained on data the attacker never sees, misclassifies
with a chosen probability alpha.  Verification utilities check the
guarantee by Monte Carlo sampling, independent root finding and full
defender-retraining experiments.
"""

from .data import (
    ConstantColumnError,
    CsvFormatError,
    Dataset,
    DgpSpec,
    Standardizer,
    apply_standardizer,
    fit_standardizer,
    generate_dgp,
    invert_standardizer,
    load_csv,
    load_dgp_spec,
    save_dgp_spec,
    split,
)
from .glm import (
    Estimator,
    FitConfig,
    FittedModel,
    SeparationError,
    accuracy,
    decide,
    fit,
    log_likelihood,
    margin,
    predict_proba,
    score,
)
from .covariance import (
    CovarianceEstimate,
    IllConditionedError,
    covariance_mle,
    covariance_ridge,
    estimate_covariance,
    weight_matrix,
)
from .attack import (
    AttackError,
    AttackRequest,
    AttackResult,
    DegenerateBelief,
    DegenerateDirection,
    NoFeasibleIntensity,
    RootCandidate,
    SpuriousRootsOnly,
    SweepItem,
    misclassification_probability,
    orthogonal_perturbation,
    solve_intensity,
    sweep_alpha,
)
from .verify import (
    BracketError,
    CovarianceFactorizationError,
    McReport,
    RegSweepRow,
    TransferReport,
    bisection_oracle,
    mc_belief_check,
    oracle_min_intensity,
    regularization_sweep,
    transfer_experiment,
)

__version__ = "0.1.0"
