"""Binary classification training toolkit.

Trains a two-layer ReLU network under a difference-of-means criterion whose
population optimum is the likelihood-ratio sign rule, alongside classical
margin-penalty baselines, and checks the results against an exact
Gaussian-mixture oracle.
"""

from .datasets import (
    LabeledDataset,
    Standardizer,
    apply_standardizer,
    filter_binary,
    fit_standardizer,
    load_cifar_binary,
    load_idx,
    merged_iterator,
    sample_mixture,
    to_grayscale,
)
# the combined scorer lives at lrtnet.evaluate.evaluate; re-exporting it bare
# would shadow the submodule attribute
from .evaluate import (
    DIFFERENCE_MAX,
    SUM_MIN,
    EvalReport,
    EvolutionLog,
    EvolutionPoint,
    empirical_j,
    empirical_perr,
    export_evolution_csv,
    export_report_json,
)
from .losses import (
    Category,
    OutputNonlinearity,
    PhiSpec,
    make_legacy_phi,
    make_phi,
    make_phi_cat_a_default,
    make_phi_cat_b_identity,
    make_phi_exp,
    make_phi_hinge,
    make_phi_rational,
    output_nonlinearity,
)
from .network import (
    ForwardTrace,
    NetParams,
    ParamGradient,
    forward,
    forward_batch,
    glorot_init,
    gradient,
    load_params,
    save_params,
)
from .oracle import (
    DiscretePair,
    ErrorRates,
    HypothesisPair,
    MixtureDensity,
    brute_force_optimality,
    criterion_upper_bound,
    density,
    gaussian,
    lrt_decide,
    lrt_errors_montecarlo,
    lrt_errors_quadrature,
    posterior,
)
from .seeding import substream
from .trainer import (
    ALTERNATING_PAIRS,
    PERMUTED,
    TrainerState,
    TrainingDiverged,
    TrainRun,
    batch_step,
    init_state,
    sgd_step,
    train,
)

__version__ = "0.1.0"
