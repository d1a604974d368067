"""Cross-validation harness, metrics, and the unsupervised-then-GLM baseline.

Pooled metrics are always computed on the concatenation of every fold's
predictions, never by averaging per-fold metrics. Fold and grid runs
use seeds derived from (seed, fold index, phase, grid index) so reruns
and concurrent execution are reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .corpus import Corpus, kfold_split
from .errors import ValidationError
from .glm import (
    BINOMIAL,
    GAUSSIAN,
    ResponseModel,
    design_from_state,
    map_eta_binomial,
    map_eta_gaussian,
)
from .sampler import (
    SUPERVISED,
    UNSUPERVISED,
    PredictResult,
    SamplerConfig,
    predict,
    run_chain,
)

__all__ = [
    "METHODS",
    "FoldResult",
    "EvalReport",
    "derive_seed",
    "predictive_r2",
    "accuracy",
    "select_zeta",
    "two_step_baseline",
    "cross_validate",
]

METHODS = ("shdp_sampled", "shdp_map", "two_step")

# phase codes for seed derivation
_PHASE_TRAIN = 0
_PHASE_PREDICT = 1
_PHASE_SELECT = 2


def derive_seed(*parts: int) -> int:
    """Deterministically collapse (seed, fold, phase, ...) into one seed."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def predictive_r2(y, yhat) -> float:
    """1 - SSE/SST on held-out predictions; 1.0 means a perfect fit."""
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValidationError("responses and predictions must be equal-length vectors")
    if len(y) < 2:
        raise ValidationError("predictive R^2 needs at least two observations")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise ValidationError("predictive R^2 undefined for constant responses")
    sse = float(np.sum((yhat - y) ** 2))
    return 1.0 - sse / sst


def accuracy(y, p, threshold: float = 0.5) -> float:
    """Fraction of labels matched by thresholding predicted probabilities."""
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if y.shape != p.shape or y.ndim != 1 or len(y) == 0:
        raise ValidationError("labels and probabilities must be equal-length vectors")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValidationError("labels must be 0 or 1")
    return float(np.mean((p >= threshold).astype(np.float64) == y))


def _metric(family: str, y, yhat) -> float:
    return predictive_r2(y, yhat) if family == GAUSSIAN else accuracy(y, yhat)


def metric_name(family: str) -> str:
    return "predictive_r2" if family == GAUSSIAN else "accuracy"


def _train_and_predict(
    method: str, train: Corpus, test: Corpus, cfg: SamplerConfig, predict_seed: int
) -> PredictResult:
    if method == "two_step":
        return two_step_baseline(train, test, cfg, predict_seed=predict_seed)
    coeff = "sample" if method == "shdp_sampled" else "map"
    run_cfg = replace(cfg, mode=SUPERVISED, coeff_update=coeff)
    state, model, _ = run_chain(train, run_cfg)
    return predict(state, model, test, cfg, seed=predict_seed)


def select_zeta(
    train: Corpus,
    grid,
    cfg: SamplerConfig,
    select_train_iters: int | None = None,
) -> float:
    """Pick the coefficient prior scale on a held-out validation split.

    The fold's labelled documents are split 80/20 deterministically in
    the config seed; each grid value trains a shortened chain and the
    best validation metric wins, ties going to the smallest value.
    """
    grid = sorted(float(z) for z in grid)
    if not grid:
        raise ValidationError("zeta grid must be non-empty")
    if len(grid) == 1:
        return grid[0]
    labelled = train.labelled_indices()
    n_train = int(round(0.8 * len(labelled)))
    n_val = len(labelled) - n_train
    if n_val == 0 or n_train == 0:
        raise ValidationError(
            f"cannot split {len(labelled)} labelled documents into train and validation"
        )
    order = np.array(labelled, dtype=np.int64)
    np.random.default_rng(derive_seed(cfg.seed, _PHASE_SELECT)).shuffle(order)
    val_set = set(int(i) for i in order[n_train:])
    sub_train = train.subset([i for i in range(train.D) if i not in val_set])
    val = train.subset(sorted(val_set))
    iters = select_train_iters or max(1, cfg.train_iters // 4)

    best_zeta = grid[0]
    best_metric = -np.inf
    y_val = val.responses()
    for zi, zeta in enumerate(grid):
        z_cfg = replace(
            cfg,
            zeta=zeta,
            train_iters=iters,
            seed=derive_seed(cfg.seed, _PHASE_SELECT, zi, _PHASE_TRAIN),
            record_trace=False,
        )
        state, model, _ = run_chain(sub_train, z_cfg)
        result = predict(
            state,
            model,
            val,
            z_cfg,
            seed=derive_seed(cfg.seed, _PHASE_SELECT, zi, _PHASE_PREDICT),
        )
        m = _metric(cfg.family, y_val, result.yhat)
        if m > best_metric:
            best_metric = m
            best_zeta = zeta
    return best_zeta


def two_step_baseline(
    train: Corpus,
    test: Corpus,
    cfg: SamplerConfig,
    predict_seed: int | None = None,
) -> PredictResult:
    """Unsupervised topic learning followed by a separately fitted GLM.

    Trains an unsupervised chain (responses play no role), fits the
    coefficients once on the final allocations of the labelled training
    documents, and predicts through the usual frozen-count path so any
    performance difference against the joint model comes from training.
    """
    u_cfg = replace(cfg, mode=UNSUPERVISED)
    state, _, _ = run_chain(train, u_cfg)
    design = design_from_state(state, train.responses())
    if design.n == 0:
        raise ValidationError("two-step baseline needs labelled training documents")
    if cfg.family == GAUSSIAN:
        eta = map_eta_gaussian(design, cfg.zeta)
    else:
        eta = map_eta_binomial(design, cfg.zeta, cfg.optimizer)
    model = ResponseModel(family=cfg.family, eta=eta, zeta=cfg.zeta, delta=cfg.delta)
    return predict(state, model, test, cfg, seed=predict_seed)


@dataclass
class FoldResult:
    fold: int
    zeta: float
    metric: float
    n_test: int
    runtime_sec: float
    doc_ids: list[str]
    y: np.ndarray
    yhat: np.ndarray


@dataclass
class EvalReport:
    method: str
    family: str
    metric_name: str
    k: int
    seed: int
    folds: list[FoldResult]
    pooled_metric: float
    reference_method: str | None = None
    min_diff: float | None = None
    max_diff: float | None = None

    def fold_metrics(self) -> list[float]:
        return [f.metric for f in self.folds]

    def to_dict(self, include_timing: bool = False) -> dict:
        folds = []
        for f in self.folds:
            entry = {
                "fold": f.fold,
                "zeta": f.zeta,
                "metric": f.metric,
                "n_test": f.n_test,
            }
            if include_timing:
                entry["runtime_sec"] = f.runtime_sec
            folds.append(entry)
        return {
            "method": self.method,
            "family": self.family,
            "metric_name": self.metric_name,
            "k": self.k,
            "seed": self.seed,
            "folds": folds,
            "pooled_metric": self.pooled_metric,
            "reference_method": self.reference_method,
            "min_diff": self.min_diff,
            "max_diff": self.max_diff,
        }


def cross_validate(
    corpus: Corpus,
    k: int = 5,
    method: str = "shdp_sampled",
    cfg: SamplerConfig | None = None,
    zeta_grid=None,
    reference: EvalReport | None = None,
    select_train_iters: int | None = None,
) -> EvalReport:
    """K-fold evaluation of one method.

    Per fold: optional zeta selection on the fold's training set, a full
    training run, prediction, and the fold metric. Relative fold
    differences are reported against a reference report (pair by fold
    index); evaluating the reference method against itself yields zero
    differences.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
    cfg = cfg or SamplerConfig()
    folds = kfold_split(corpus, k, cfg.seed)
    results: list[FoldResult] = []
    all_y: list[np.ndarray] = []
    all_yhat: list[np.ndarray] = []
    for fi, (train, test) in enumerate(folds):
        started = time.perf_counter()
        fold_cfg = replace(cfg, seed=derive_seed(cfg.seed, fi, _PHASE_TRAIN))
        if zeta_grid is not None and len(list(zeta_grid)) > 1:
            zeta = select_zeta(train, zeta_grid, fold_cfg, select_train_iters)
        elif zeta_grid:
            zeta = float(sorted(zeta_grid)[0])
        else:
            zeta = cfg.zeta
        fold_cfg = replace(fold_cfg, zeta=zeta)
        result = _train_and_predict(
            method, train, test, fold_cfg, derive_seed(cfg.seed, fi, _PHASE_PREDICT)
        )
        y = test.responses()
        m = _metric(cfg.family, y, result.yhat)
        results.append(
            FoldResult(
                fold=fi,
                zeta=zeta,
                metric=m,
                n_test=test.D,
                runtime_sec=time.perf_counter() - started,
                doc_ids=result.doc_ids,
                y=y,
                yhat=result.yhat,
            )
        )
        all_y.append(y)
        all_yhat.append(result.yhat)
    pooled = _metric(cfg.family, np.concatenate(all_y), np.concatenate(all_yhat))
    report = EvalReport(
        method=method,
        family=cfg.family,
        metric_name=metric_name(cfg.family),
        k=k,
        seed=cfg.seed,
        folds=results,
        pooled_metric=pooled,
    )
    if reference is None and method == "shdp_sampled":
        reference = report
    if reference is not None:
        if len(reference.folds) != len(report.folds):
            raise ValidationError("reference report has a different fold count")
        diffs = [
            f.metric - r.metric for f, r in zip(report.folds, reference.folds)
        ]
        report.reference_method = reference.method
        report.min_diff = min(diffs)
        report.max_diff = max(diffs)
    return report
