"""GLM response head: coefficient priors, likelihood factors, and updates.

Each instantiated topic carries one regression coefficient. The linear
predictor for a document is the dot product of the coefficients with the
document's empirical topic distribution. Two families are implemented:
Gaussian (identity link, dispersion ``delta``) and binomial (logit link).

The Gaussian coefficient posterior is exact; the binomial posterior is
approximated by a Gaussian centred at the MAP estimate with the inverse
negative Hessian as covariance, with the MAP found by L-BFGS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .optim import OptimizerConfig, minimize

__all__ = [
    "GAUSSIAN",
    "BINOMIAL",
    "ResponseModel",
    "TopicDesignMatrix",
    "design_from_state",
    "sigmoid",
    "response_loglik",
    "allocation_response_factor",
    "sample_eta_gaussian",
    "map_eta_gaussian",
    "binomial_logpost",
    "binomial_grad",
    "map_eta_binomial",
    "sample_eta_binomial_laplace",
    "predict_response",
]

GAUSSIAN = "gaussian"
BINOMIAL = "binomial"
_FAMILIES = (GAUSSIAN, BINOMIAL)


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def _log_sigmoid(x: float) -> float:
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@dataclass
class ResponseModel:
    """Per-topic regression coefficients plus family hyperparameters.

    ``eta`` always has one entry per instantiated topic; the sampler
    grows it when topics are born and shrinks it on compaction.
    """

    family: str
    eta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    zeta: float = 1.0
    delta: float = 0.5

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValidationError(f"unknown response family {self.family!r}")
        if self.zeta <= 0:
            raise ValidationError("zeta must be > 0")
        if self.delta <= 0:
            raise ValidationError("delta must be > 0")
        self.eta = np.asarray(self.eta, dtype=np.float64)

    def apply_topic_mapping(self, mapping: dict[int, int], new_k: int) -> None:
        """Realign coefficients after topic compaction."""
        eta = np.zeros(new_k)
        for old, new in mapping.items():
            eta[new] = self.eta[old]
        self.eta = eta


@dataclass(frozen=True)
class TopicDesignMatrix:
    """Empirical topic distributions of labelled documents and their responses."""

    X: np.ndarray  # (n_labelled, K), rows sum to 1
    y: np.ndarray  # (n_labelled,)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2 or len(y) != X.shape[0]:
            raise ValidationError("design matrix and responses are misaligned")
        if X.shape[0] and np.abs(X.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValidationError("design rows must sum to 1")

    @property
    def K(self) -> int:
        return self.X.shape[1]

    @property
    def n(self) -> int:
        return self.X.shape[0]


def design_from_state(state, responses: np.ndarray) -> TopicDesignMatrix:
    """Build the design matrix from current allocations of labelled docs.

    ``responses`` uses NaN for unlabelled documents, which are skipped.
    """
    rows = []
    y = []
    for d in range(state.D):
        if math.isnan(responses[d]):
            continue
        rows.append(state.topic_shares(d))
        y.append(responses[d])
    if rows:
        X = np.vstack(rows)
    else:
        X = np.zeros((0, state.K))
    return TopicDesignMatrix(X=X, y=np.array(y, dtype=np.float64))


def response_loglik(model: ResponseModel, zbar: np.ndarray, y: float) -> float:
    """Log density of the response given a topic distribution, up to a constant."""
    zbar = np.asarray(zbar, dtype=np.float64)
    if len(zbar) != len(model.eta):
        raise ValidationError("topic distribution and coefficients have different lengths")
    rho = float(model.eta @ zbar)
    if model.family == GAUSSIAN:
        r = y - rho
        return -(r * r) / (2.0 * model.delta)
    if y not in (0.0, 1.0):
        raise ValidationError(f"binomial response must be 0 or 1, got {y}")
    return _log_sigmoid(rho) if y == 1.0 else _log_sigmoid(-rho)


def allocation_response_factor(
    model: ResponseModel,
    state,
    d: int,
    k: int,
    y: float | None,
    new_topic_eta: float | None = None,
) -> float:
    """Response weight for assigning the held-out token of document d to topic k.

    Assumes the token has already been removed from the counts. For the
    new-topic candidate pass ``k == state.K`` together with the fresh
    coefficient draw. Unlabelled documents (y None) weigh every topic
    equally.
    """
    if y is None:
        return 1.0
    n_d = state.doc_length(d)
    counts = state._n_dk[d, : state.K].astype(np.float64)
    scoring = model
    if k == state.K:
        if new_topic_eta is None:
            raise ValidationError("new-topic candidate needs a coefficient draw")
        scoring = replace(model, eta=np.append(model.eta, new_topic_eta))
        counts = np.append(counts, 0.0)
    else:
        counts = counts.copy()
    counts[k] += 1.0
    return math.exp(response_loglik(scoring, counts / n_d, y))


def _posterior_factors(design: TopicDesignMatrix, zeta: float):
    A = design.X.T @ design.X + zeta * np.eye(design.K)
    b = design.X.T @ design.y
    return A, b


def map_eta_gaussian(design: TopicDesignMatrix, zeta: float) -> np.ndarray:
    """Posterior mean of the Gaussian coefficient posterior."""
    if zeta <= 0:
        raise ValidationError("zeta must be > 0")
    A, b = _posterior_factors(design, zeta)
    return np.linalg.solve(A, b)


def sample_eta_gaussian(
    design: TopicDesignMatrix, zeta: float, rng: np.random.Generator
) -> np.ndarray:
    """Draw coefficients from their exact Gaussian posterior."""
    if zeta <= 0:
        raise ValidationError("zeta must be > 0")
    A, b = _posterior_factors(design, zeta)
    L = np.linalg.cholesky(A)
    mean = np.linalg.solve(A, b)
    # cov = A^{-1}; solving L^T x = z gives cov(x) = A^{-1}
    noise = np.linalg.solve(L.T, rng.standard_normal(design.K))
    return mean + noise


def binomial_logpost(design: TopicDesignMatrix, eta: np.ndarray, zeta: float) -> float:
    """Penalised logistic log posterior, up to an additive constant.

    Responses are recoded from {0,1} to {-1,+1} internally.
    """
    s = _signs(design.y)
    rho = design.X @ eta
    return float(-np.sum(_softplus(-s * rho)) - 0.5 * zeta * (eta @ eta))


def binomial_grad(design: TopicDesignMatrix, eta: np.ndarray, zeta: float) -> np.ndarray:
    """Gradient of the penalised logistic log posterior."""
    s = _signs(design.y)
    rho = design.X @ eta
    w = 1.0 - sigmoid(s * rho)
    return design.X.T @ (w * s) - zeta * np.asarray(eta, dtype=np.float64)


def _signs(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValidationError("binomial responses must be 0 or 1")
    return 2.0 * y - 1.0


def _softplus(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def map_eta_binomial(
    design: TopicDesignMatrix,
    zeta: float,
    config: OptimizerConfig | None = None,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """MAP estimate of the binomial coefficients via L-BFGS."""
    from .errors import OptimizationError

    cfg = config or OptimizerConfig()
    if x0 is None:
        x0 = np.zeros(design.K)

    def objective(eta):
        return -binomial_logpost(design, eta, zeta), -binomial_grad(design, eta, zeta)

    result = minimize(objective, np.asarray(x0, dtype=np.float64), cfg)
    if not result.converged:
        raise OptimizationError(
            "binomial MAP did not reach gradient tolerance "
            f"({result.grad_norm:.3e} > {cfg.grad_tol:.3e} after {result.iterations} iterations)",
            last_iterate=result.x,
            iterations=result.iterations,
            grad_norm=result.grad_norm,
        )
    return result.x


def binomial_hessian(design: TopicDesignMatrix, eta: np.ndarray, zeta: float) -> np.ndarray:
    """Negative Hessian of the log posterior (positive definite for zeta > 0)."""
    rho = design.X @ eta
    p = sigmoid(rho)
    w = p * (1.0 - p)
    return design.X.T @ (design.X * w[:, None]) + zeta * np.eye(design.K)


def sample_eta_binomial_laplace(
    design: TopicDesignMatrix,
    zeta: float,
    rng: np.random.Generator,
    config: OptimizerConfig | None = None,
    eta_map: np.ndarray | None = None,
) -> np.ndarray:
    """Draw coefficients from the Laplace approximation around the MAP."""
    if eta_map is None:
        eta_map = map_eta_binomial(design, zeta, config)
    H = binomial_hessian(design, eta_map, zeta)
    L = np.linalg.cholesky(H)
    noise = np.linalg.solve(L.T, rng.standard_normal(design.K))
    return eta_map + noise


def predict_response(model: ResponseModel, ezbar: np.ndarray) -> float:
    """Expected response (Gaussian) or positive-class probability (binomial)."""
    ezbar = np.asarray(ezbar, dtype=np.float64)
    if len(ezbar) != len(model.eta):
        raise ValidationError("topic distribution and coefficients have different lengths")
    rho = float(model.eta @ ezbar)
    if model.family == GAUSSIAN:
        return rho
    return float(sigmoid(rho))
