"""Gibbs engine: sweeps, chain initialization, training, and prediction.

A chain owns two independent random streams derived from one seed: the
state stream drives everything that shapes the topic-side state
(allocations, sticks, table counts, concentrations) while the model
stream drives coefficient draws. Keeping them separate makes a
supervised run on fully unlabelled data consume the state stream
exactly like an unsupervised run, so the two are trajectory-identical
for the same seed.

The hot token loop lives in a jitted kernel; the module-level
``sample_allocation`` / ``sample_table_counts`` functions are the
pure-Python reference implementations that consume the same stream in
the same order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .corpus import Corpus
from .diagnostics import ChainTrace
from .errors import NumericalError, ValidationError
from .glm import (
    BINOMIAL,
    GAUSSIAN,
    ResponseModel,
    design_from_state,
    map_eta_binomial,
    map_eta_gaussian,
    predict_response,
    sample_eta_binomial_laplace,
    sample_eta_gaussian,
)
from .optim import OptimizerConfig
from .state import ConcentrationPrior, HdpState, stick_fraction

__all__ = [
    "SamplerConfig",
    "PredictResult",
    "split_seed",
    "sample_allocation",
    "sample_table_counts",
    "sample_beta",
    "sweep",
    "run_chain",
    "predict",
]

SUPERVISED = "supervised"
UNSUPERVISED = "unsupervised"
_MODES = (SUPERVISED, UNSUPERVISED)
_COEFF_UPDATES = ("sample", "map")
_TABLE_RULES = ("crt", "printed")


@dataclass(frozen=True)
class SamplerConfig:
    """Run configuration for training and prediction."""

    mode: str = SUPERVISED
    family: str = GAUSSIAN
    train_iters: int = 2000
    predict_iters: int = 500
    burn_in_predict: int = 100
    seed: int = 0
    coeff_update: str = "sample"
    record_trace: bool = True
    zeta: float = 1.0  # prior scale for coefficients (variance in formulas)
    delta: float = 0.5  # Gaussian dispersion
    alpha_w: float = 0.01  # symmetric Dirichlet parameter for topics
    k0: int = 1  # topics at initialization
    alpha_prior: ConcentrationPrior = field(default_factory=ConcentrationPrior)
    gamma_prior: ConcentrationPrior = field(default_factory=ConcentrationPrior)
    table_rule: str = "crt"
    check_invariants: bool = False
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.family not in (GAUSSIAN, BINOMIAL):
            raise ValidationError(f"unknown family {self.family!r}")
        if self.coeff_update not in _COEFF_UPDATES:
            raise ValidationError(f"unknown coeff_update {self.coeff_update!r}")
        if self.table_rule not in _TABLE_RULES:
            raise ValidationError(f"unknown table_rule {self.table_rule!r}")
        if self.train_iters < 1:
            raise ValidationError("train_iters must be >= 1")
        if self.predict_iters <= self.burn_in_predict:
            raise ValidationError("predict_iters must exceed burn_in_predict")
        if self.burn_in_predict < 0:
            raise ValidationError("burn_in_predict must be >= 0")
        if self.zeta <= 0 or self.delta <= 0 or self.alpha_w <= 0:
            raise ValidationError("zeta, delta and alpha_w must be > 0")
        if self.k0 < 1:
            raise ValidationError("k0 must be >= 1")


def split_seed(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Derive the (state, model) random streams from one seed."""
    children = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])


# ----------------------------------------------------------------------------
# reference operations (pure Python, stream-compatible with the kernel)
# ----------------------------------------------------------------------------


def sample_allocation(
    state: HdpState,
    model: ResponseModel | None,
    d: int,
    j: int,
    y: float | None,
    rng_state: np.random.Generator,
    rng_model: np.random.Generator | None = None,
) -> int:
    """Resample the topic of token j (global index) in document d.

    Removes the token from the counts, weighs every instantiated topic
    plus a fresh one, samples proportionally, and re-adds the token
    under the sampled topic. Passing ``model`` marks supervised mode;
    ``y`` of None (or NaN) marks the document unlabelled.
    """
    if y is not None and math.isnan(y):
        y = None
    state.ensure_capacity(state.K + 1)
    w = int(state.tokens[j])
    k_old = int(state.z[j])
    if k_old >= 0:
        state._n_dk[d, k_old] -= 1
        state._c_kw[k_old, w] -= 1
        state._c_k[k_old] -= 1
    K = state.K
    respond = model is not None and y is not None
    eta_new = 0.0
    if respond:
        eta_new = rng_model.standard_normal() * math.sqrt(model.zeta)

    f = (state._c_kw[:K, w] + state.alpha_w) / (state._c_k[:K] + state.V * state.alpha_w)
    wgt = np.empty(K + 1)
    wgt[:K] = (state._n_dk[d, :K] + state.alpha * state._beta[:K]) * f
    wgt[K] = state.alpha * state.beta_new / state.V

    if respond:
        n_d = state.doc_length(d)
        eta_ext = np.append(model.eta, eta_new)
        rho = (float(model.eta @ state._n_dk[d, :K]) + eta_ext) / n_d
        if model.family == GAUSSIAN:
            ll = -((y - rho) ** 2) / (2.0 * model.delta)
        else:
            if y not in (0.0, 1.0):
                raise ValidationError("binomial response must be 0 or 1")
            ll = np.array([_kernels._log_sigmoid(r if y > 0.5 else -r) for r in rho])
        wgt *= np.exp(ll - ll.max())

    total = wgt.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise NumericalError(
            f"allocation weights for document {d}, token {j} are zero or non-finite"
        )
    u = rng_state.random() * total
    acc = 0.0
    k_sel = K
    for k in range(K + 1):
        acc += wgt[k]
        if u < acc:
            k_sel = k
            break

    if k_sel == K:
        piece = stick_fraction(rng_state, state.gamma) * state.beta_new
        state._beta[K] = piece
        state.beta_new = state.beta_new - piece
        if model is not None:
            if not respond:
                eta_new = rng_model.standard_normal() * math.sqrt(model.zeta)
            model.eta = np.append(model.eta, eta_new)
        state.K += 1

    state.z[j] = k_sel
    state._n_dk[d, k_sel] += 1
    state._c_kw[k_sel, w] += 1
    state._c_k[k_sel] += 1
    return k_sel


def _sample_tables_doc(
    state: HdpState, d: int, rng_state: np.random.Generator, printed: bool = False
) -> None:
    for k in range(state.K):
        n = int(state._n_dk[d, k])
        if n == 0:
            state._m_dk[d, k] = 0
            continue
        ab = state.alpha * state._beta[k]
        if printed:
            m = 0
            for i in range(1, n + 1):
                if rng_state.random() >= ab / (ab + i):
                    m += 1
        else:
            m = 1
            for i in range(1, n):
                if rng_state.random() < ab / (ab + i):
                    m += 1
        state._m_dk[d, k] = m


def sample_table_counts(
    state: HdpState, rng_state: np.random.Generator, rule: str = "crt"
) -> None:
    """Resample every document's table counts given current allocations.

    The default rule simulates the restaurant table process (first
    token always opens a table). ``rule="printed"`` keeps the
    alternative thresholded form for comparison; it can return 0 tables
    for an occupied cell and is not used by the main sampler.
    """
    if rule not in _TABLE_RULES:
        raise ValidationError(f"unknown table rule {rule!r}")
    for d in range(state.D):
        _sample_tables_doc(state, d, rng_state, printed=(rule == "printed"))


def sample_beta(state: HdpState, rng_state: np.random.Generator) -> None:
    """Redraw stick weights from Dirichlet(m_1, ..., m_K, gamma).

    Implemented by normalizing gamma draws so topics whose tables
    vanished mid-sweep receive exactly zero weight instead of tripping
    the Dirichlet sampler.
    """
    K = state.K
    conc = np.empty(K + 1)
    conc[:K] = state._m_dk[:, :K].sum(axis=0)
    conc[K] = state.gamma
    g = rng_state.standard_gamma(conc)
    total = g.sum()
    state._beta[:K] = g[:K] / total
    state.beta_new = float(g[K] / total)


# ----------------------------------------------------------------------------
# sweeps
# ----------------------------------------------------------------------------


def _family_code(family: str) -> int:
    return _kernels.FAMILY_GAUSSIAN if family == GAUSSIAN else _kernels.FAMILY_BINOMIAL


def _refresh_coefficients(state, model, responses, cfg, rng_model):
    design = design_from_state(state, responses)
    if design.n == 0:
        return None
    if cfg.family == GAUSSIAN:
        if cfg.coeff_update == "sample":
            model.eta = sample_eta_gaussian(design, model.zeta, rng_model)
        else:
            model.eta = map_eta_gaussian(design, model.zeta)
    else:
        eta_map = map_eta_binomial(design, model.zeta, cfg.optimizer, x0=model.eta)
        if cfg.coeff_update == "sample":
            model.eta = sample_eta_binomial_laplace(
                design, model.zeta, rng_model, eta_map=eta_map
            )
        else:
            model.eta = eta_map
    return design


def sweep(
    state: HdpState,
    model: ResponseModel | None,
    corpus: Corpus,
    cfg: SamplerConfig,
    rng_state: np.random.Generator,
    rng_model: np.random.Generator | None = None,
    trace: ChainTrace | None = None,
    responses: np.ndarray | None = None,
) -> None:
    """One full Gibbs sweep, in order: per-document allocations and
    table counts, stick weights, compaction, concentrations, and the
    coefficient refresh (supervised mode only)."""
    supervised = cfg.mode == SUPERVISED and model is not None
    if responses is None:
        responses = corpus.responses() if supervised else np.full(state.D, np.nan)
    family = _family_code(cfg.family)
    printed = cfg.table_rule == "printed"

    eta_buf = None
    if supervised:
        eta_buf = np.zeros(state.capacity)
        eta_buf[: state.K] = model.eta

    k_box = np.empty(1, dtype=np.int64)
    beta_box = np.empty(1, dtype=np.float64)
    for d in range(state.D):
        n_d = state.doc_length(d)
        state.ensure_capacity(state.K + n_d + 1)
        if eta_buf is not None and len(eta_buf) < state.capacity:
            grown = np.zeros(state.capacity)
            grown[: len(eta_buf)] = eta_buf
            eta_buf = grown
        y = responses[d]
        labelled = supervised and not math.isnan(y)
        k_box[0] = state.K
        beta_box[0] = state.beta_new
        bad = _kernels.doc_gibbs_pass(
            d,
            int(state.offsets[d]),
            int(state.offsets[d + 1]),
            state.tokens,
            state.z,
            state._n_dk,
            state._c_kw,
            state._c_k,
            state._m_dk,
            state._beta,
            beta_box,
            eta_buf if eta_buf is not None else _EMPTY_ETA,
            k_box,
            state.alpha,
            state.gamma,
            state.alpha_w,
            state.V,
            float(y) if labelled else 0.0,
            labelled,
            family,
            cfg.delta,
            cfg.zeta,
            supervised,
            True,
            printed,
            rng_state,
            rng_model if supervised else _DUMMY_RNG,
        )
        state.K = int(k_box[0])
        state.beta_new = float(beta_box[0])
        if bad >= 0:
            raise NumericalError(
                f"allocation weights for document {d}, token {bad} are zero or non-finite"
            )

    if supervised:
        model.eta = eta_buf[: state.K].copy()

    sample_beta(state, rng_state)
    mapping = state.compact_topics()
    if supervised:
        model.apply_topic_mapping(mapping, state.K)
    state.resample_concentrations(cfg.alpha_prior, cfg.gamma_prior, rng_state)

    design = None
    if supervised:
        design = _refresh_coefficients(state, model, responses, cfg, rng_model)

    if trace is not None:
        if design is not None:
            residual = float(np.linalg.norm(design.y - design.X @ model.eta))
        else:
            residual = 0.0
        eta_l2 = float(np.linalg.norm(model.eta)) if supervised else 0.0
        trace.append(
            K=state.K,
            eta_l2=eta_l2,
            residual_l2=residual,
            alpha=state.alpha,
            gamma=state.gamma,
        )

    if cfg.check_invariants:
        state.validate(
            eta=model.eta if supervised else None,
            check_tables=not printed,
            compacted=True,
        )


_EMPTY_ETA = np.zeros(1)
_DUMMY_RNG = np.random.default_rng(0)


# ----------------------------------------------------------------------------
# chains
# ----------------------------------------------------------------------------


def init_chain(
    corpus: Corpus,
    cfg: SamplerConfig,
    rng_state: np.random.Generator,
    rng_model: np.random.Generator,
) -> tuple[HdpState, ResponseModel | None]:
    """Random initialization: concentrations from their priors, tokens
    spread uniformly over k0 topics, table counts and stick weights
    from their conditionals, coefficients from the prior."""
    alpha = float(rng_state.gamma(cfg.alpha_prior.shape, 1.0 / cfg.alpha_prior.rate))
    gamma = float(rng_state.gamma(cfg.gamma_prior.shape, 1.0 / cfg.gamma_prior.rate))
    state = HdpState.from_corpus(
        corpus, alpha, gamma, cfg.alpha_w, capacity=max(16, 2 * cfg.k0)
    )
    z = rng_state.integers(0, cfg.k0, size=len(state.tokens))
    state.assign_all(z, cfg.k0)
    state._beta[: cfg.k0] = 1.0 / (cfg.k0 + 1)
    state.beta_new = 1.0 / (cfg.k0 + 1)
    sample_table_counts(state, rng_state, cfg.table_rule)
    sample_beta(state, rng_state)
    model = None
    if cfg.mode == SUPERVISED:
        eta0 = rng_model.standard_normal(state.K) * math.sqrt(cfg.zeta)
        model = ResponseModel(
            family=cfg.family, eta=eta0, zeta=cfg.zeta, delta=cfg.delta
        )
    return state, model


def run_chain(
    corpus: Corpus, cfg: SamplerConfig
) -> tuple[HdpState, ResponseModel | None, ChainTrace | None]:
    """Train one chain for cfg.train_iters sweeps."""
    rng_state, rng_model = split_seed(cfg.seed)
    state, model = init_chain(corpus, cfg, rng_state, rng_model)
    trace = ChainTrace() if cfg.record_trace else None
    responses = corpus.responses()
    for _ in range(cfg.train_iters):
        sweep(state, model, corpus, cfg, rng_state, rng_model, trace, responses)
    return state, model, trace


@dataclass
class PredictResult:
    doc_ids: list[str]
    ezbar: np.ndarray  # (n_docs, K_trained), rows renormalized over trained topics
    yhat: np.ndarray


def predict(
    state: HdpState,
    model: ResponseModel,
    test_corpus: Corpus,
    cfg: SamplerConfig,
    seed: int | None = None,
) -> PredictResult:
    """Sample test-document topic distributions under the trained model.

    Training counts and stick weights stay frozen; test tokens update a
    local copy. New topics may be instantiated while sampling but any
    mass on them is discarded when the per-document distributions are
    averaged after burn-in, and the result is renormalized over the
    trained topics before the response expectation is evaluated.
    """
    if state.K < 1:
        raise ValidationError("prediction requires at least one trained topic")
    if len(model.eta) != state.K:
        raise ValidationError("model coefficients are not aligned with the state")
    rng_state, _ = split_seed(cfg.seed if seed is None else seed)
    pstate = HdpState.for_prediction(state, test_corpus)
    k_train = state.K
    lengths = pstate.doc_lengths().astype(np.float64)
    accum = np.zeros((pstate.D, k_train))
    kept = 0
    k_box = np.empty(1, dtype=np.int64)
    beta_box = np.empty(1, dtype=np.float64)
    for it in range(cfg.predict_iters):
        for d in range(pstate.D):
            n_d = pstate.doc_length(d)
            pstate.ensure_capacity(pstate.K + n_d + 1)
            k_box[0] = pstate.K
            beta_box[0] = pstate.beta_new
            bad = _kernels.doc_gibbs_pass(
                d,
                int(pstate.offsets[d]),
                int(pstate.offsets[d + 1]),
                pstate.tokens,
                pstate.z,
                pstate._n_dk,
                pstate._c_kw,
                pstate._c_k,
                pstate._m_dk,
                pstate._beta,
                beta_box,
                _EMPTY_ETA,
                k_box,
                pstate.alpha,
                pstate.gamma,
                pstate.alpha_w,
                pstate.V,
                0.0,
                False,
                _family_code(cfg.family),
                cfg.delta,
                cfg.zeta,
                False,
                False,
                False,
                rng_state,
                _DUMMY_RNG,
            )
            pstate.K = int(k_box[0])
            pstate.beta_new = float(beta_box[0])
            if bad >= 0:
                raise NumericalError(
                    f"prediction weights for document {d}, token {bad} are zero or non-finite"
                )
        if it >= cfg.burn_in_predict:
            accum += pstate._n_dk[:, :k_train] / lengths[:, None]
            kept += 1
    ezbar = accum / kept
    mass = ezbar.sum(axis=1)
    nonzero = mass > 0
    ezbar[nonzero] /= mass[nonzero, None]
    yhat = np.array([predict_response(model, row) for row in ezbar])
    return PredictResult(
        doc_ids=[d.id for d in test_corpus.documents], ezbar=ezbar, yhat=yhat
    )


def unsupervised_config(cfg: SamplerConfig) -> SamplerConfig:
    """Copy a config with the mode switched to unsupervised."""
    return replace(cfg, mode=UNSUPERVISED)
