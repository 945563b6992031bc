"""candlearn: multiclass learning when each example carries a set of
candidate labels instead of a single one.

The pieces fit together as: ``losses`` defines scalar surrogates and the
set-loss families, ``sampling`` generates candidate annotations from a
class posterior, ``risk`` rescales set losses into unbiased risk
estimates, ``bounds`` evaluates the matching generalization bounds,
``model`` trains a small scorer on annotated data, and ``data`` handles
synthetic blobs, IDX tensors, and dataset files.  ``cli`` wires the lot
into the ``candlearn`` command.
"""

from .bounds import (
    BoundInputs,
    BoundReport,
    bound_report,
    branch,
    deviation_term,
    empirical_sup_norm_search,
    error_bound,
    rademacher_bound,
    sup_norm,
)
from .data import (
    AnnotatedDataset,
    IdxFormatError,
    IdxTensor,
    LabeledDataset,
    SyntheticSpec,
    circle_means,
    gaussian_posterior,
    generate_synthetic,
    load_annotated,
    load_dataset,
    load_idx_pair,
    load_labeled,
    onehot_annotator,
    oracle_annotator,
    parse_idx,
    restrict_classes,
    save_annotated,
    save_labeled,
    softmax_annotator,
    write_idx,
)
from .losses import (
    RAMP_SHIFTED,
    SIGMOID_SHIFTED,
    SURROGATES,
    ZERO_ONE,
    InvalidCandidateSetError,
    LossScheme,
    NonDifferentiableLossError,
    Strategy,
    SurrogateKind,
    SurrogateLoss,
    additive_scheme,
    candidate_loss,
    candidate_loss_grad,
    complementary_loss,
    dual_candidate_loss,
    eval_surrogate,
    general_complementary_loss,
    ordinary_loss,
    ova_candidate_loss,
    ova_scheme,
    pc_candidate_loss,
    pc_scheme,
    scheme_for,
    surrogate_grad,
)
from .model import (
    MlpScorer,
    TrainConfig,
    TrainingDivergedError,
    backward,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .risk import (
    ErrorEstimate,
    RiskReport,
    classification_error,
    empirical_risk,
    rescale_factor,
    true_risk_oracle,
    zero_one_evaluate,
)
from .sampling import (
    AnnotatedExample,
    CandidateSet,
    all_candidate_sets,
    annotate_dataset,
    as_singleton_examples,
    candidate_probability,
    posterior_mixture,
    sample_candidate_set,
)

__version__ = "0.1.0"
