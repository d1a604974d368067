"""Supervised hierarchical Dirichlet process topic regression.

An infinite-topic model of grouped observations whose per-group response
follows a generalised linear model on the empirical topic proportions.
Inference is collapsed Gibbs sampling; prediction, an unsupervised
two-step baseline, cross-validation, and convergence diagnostics are
included.
"""

from .corpus import (
    Corpus,
    EncodedDocument,
    RawDocument,
    Vocabulary,
    encode,
    kfold_split,
    load_jsonl,
    log_transform_responses,
    tfidf_prune,
)
from .diagnostics import ChainTrace, rolling_shrink, shrink_factor
from .errors import (
    DegenerateTraceError,
    NumericalError,
    OptimizationError,
    ShdpError,
    ValidationError,
)
from .evaluation import (
    EvalReport,
    accuracy,
    cross_validate,
    predictive_r2,
    select_zeta,
    two_step_baseline,
)
from .glm import (
    BINOMIAL,
    GAUSSIAN,
    ResponseModel,
    TopicDesignMatrix,
    allocation_response_factor,
    binomial_grad,
    binomial_logpost,
    design_from_state,
    map_eta_binomial,
    map_eta_gaussian,
    predict_response,
    response_loglik,
    sample_eta_binomial_laplace,
    sample_eta_gaussian,
)
from .optim import OptimizerConfig, OptimizeResult, minimize
from .sampler import (
    PredictResult,
    SamplerConfig,
    predict,
    run_chain,
    sample_allocation,
    sample_beta,
    sample_table_counts,
    split_seed,
    sweep,
)
from .state import ConcentrationPrior, HdpState

__version__ = "0.1.0"
