"""Command-line entry points.

Subcommands: preprocess, train, predict, eval, diag, topics. Every
command is deterministic given its flags and seed. Exit codes: 0 on
success, 2 for configuration or validation problems, 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import serialize
from .diagnostics import ChainTrace, rolling_shrink
from .errors import NumericalError, ValidationError
from .evaluation import EvalReport, FoldResult, cross_validate
from .glm import BINOMIAL, GAUSSIAN
from .sampler import SamplerConfig, predict, run_chain

__all__ = ["main", "build_parser"]


def _zeta_value(raw: float, as_variance: bool) -> float:
    """Grid values are prior standard deviations unless told otherwise."""
    if raw <= 0:
        raise ValidationError("zeta must be > 0")
    return raw if as_variance else raw * raw


def cmd_preprocess(args) -> int:
    docs = corpus_mod.load_jsonl(args.input)
    vocab = corpus_mod.tfidf_prune(
        docs, keep=args.keep, max_doc_frac=args.max_doc_frac, min_count=args.min_count
    )
    encoded, dropped_docs = corpus_mod.encode(docs, vocab)
    if args.log_response:
        encoded = corpus_mod.log_transform_responses(encoded, offset=args.offset)
    serialize.save_corpus(encoded, args.out)
    all_terms = set()
    for d in docs:
        all_terms.update(d.tokens)
    report = {
        "dropped_terms": sorted(all_terms - set(vocab.terms)),
        "dropped_docs": dropped_docs,
    }
    Path(args.report).write_text(serialize.canonical_json(report), encoding="utf-8")
    print(
        f"kept {len(vocab)} terms, {encoded.D} documents "
        f"({len(dropped_docs)} dropped)",
        file=sys.stderr,
    )
    return 0


def _sampler_config(args, mode="supervised") -> SamplerConfig:
    return SamplerConfig(
        mode=mode,
        family=args.family,
        train_iters=args.iters,
        predict_iters=getattr(args, "predict_iters", 500),
        burn_in_predict=getattr(args, "burn_in", 100),
        seed=args.seed,
        coeff_update=getattr(args, "coeff", "sample"),
        zeta=_zeta_value(args.zeta, args.zeta_as_variance),
        delta=args.delta,
        alpha_w=args.alpha_w,
        k0=args.k0,
        table_rule=args.table_rule,
    )


def cmd_train(args) -> int:
    corpus = serialize.load_corpus(args.corpus)
    cfg = _sampler_config(args)
    state, model, trace = run_chain(corpus, cfg)
    serialize.save_model(args.out, state, model, corpus.vocabulary, seed=args.seed)
    if args.trace:
        trace.to_csv(args.trace)
    print(
        f"trained {cfg.train_iters} iterations: K={state.K}, "
        f"alpha={state.alpha:.4f}, gamma={state.gamma:.4f}",
        file=sys.stderr,
    )
    return 0


def cmd_predict(args) -> int:
    state, model, meta = serialize.load_model(args.model)
    vocab = meta["vocabulary"]
    test_path = Path(args.corpus)
    if test_path.suffix == ".jsonl":
        raw = corpus_mod.load_jsonl(test_path)
        test, dropped = corpus_mod.encode(raw, vocab)
        if dropped:
            print(
                f"excluded {len(dropped)} documents with no in-vocabulary tokens: "
                + ", ".join(dropped),
                file=sys.stderr,
            )
    else:
        test = serialize.load_corpus(test_path)
        if test.vocabulary.terms != vocab.terms:
            raise ValidationError(
                "test corpus vocabulary does not match the model snapshot"
            )
    cfg = SamplerConfig(
        mode="unsupervised",
        family=model.family,
        predict_iters=args.iters,
        burn_in_predict=args.burn_in,
        seed=args.seed,
    )
    with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "ezbar", "yhat"])
        if test.D > 0:
            result = predict(state, model, test, cfg, seed=args.seed)
            for i, doc_id in enumerate(result.doc_ids):
                ez = json.dumps([float(v) for v in result.ezbar[i]])
                writer.writerow([doc_id, ez, repr(float(result.yhat[i]))])
    return 0


def cmd_eval(args) -> int:
    corpus = serialize.load_corpus(args.corpus)
    cfg = _sampler_config(args)
    grid = [_zeta_value(z, args.zeta_as_variance) for z in args.zeta_grid]
    reference = None
    if args.reference:
        reference = _load_report(args.reference)
    method = args.method.replace("-", "_")
    report = cross_validate(
        corpus,
        k=args.folds,
        method=method,
        cfg=cfg,
        zeta_grid=grid,
        reference=reference,
        select_train_iters=args.select_iters,
    )
    Path(args.out).write_text(
        serialize.canonical_json(report.to_dict(include_timing=args.timing)),
        encoding="utf-8",
    )
    if args.predictions:
        with Path(args.predictions).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fold", "doc_id", "y", "yhat"])
            for fold in report.folds:
                for doc_id, y, yhat in zip(fold.doc_ids, fold.y, fold.yhat):
                    writer.writerow([fold.fold, doc_id, repr(float(y)), repr(float(yhat))])
    print(
        f"{report.method}: pooled {report.metric_name} = {report.pooled_metric:.4f}",
        file=sys.stderr,
    )
    return 0


def _load_report(path) -> EvalReport:
    obj = serialize._read_json(path)
    folds = [
        FoldResult(
            fold=f["fold"],
            zeta=f["zeta"],
            metric=f["metric"],
            n_test=f["n_test"],
            runtime_sec=f.get("runtime_sec", 0.0),
            doc_ids=[],
            y=np.zeros(0),
            yhat=np.zeros(0),
        )
        for f in obj["folds"]
    ]
    return EvalReport(
        method=obj["method"],
        family=obj["family"],
        metric_name=obj["metric_name"],
        k=obj["k"],
        seed=obj["seed"],
        folds=folds,
        pooled_metric=obj["pooled_metric"],
    )


def cmd_diag(args) -> int:
    if len(args.traces) < 2:
        raise ValidationError("diagnostics need at least two trace files")
    traces = [ChainTrace.from_csv(p) for p in args.traces]
    lengths = {len(t) for t in traces}
    if len(lengths) > 1:
        print(
            f"warning: trace lengths differ {sorted(lengths)}; truncating to shortest",
            file=sys.stderr,
        )
    series = rolling_shrink(traces, args.statistic, args.step)
    with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "rhat"])
        for iteration, rhat in series:
            writer.writerow([iteration, repr(float(rhat))])
    return 0


def cmd_topics(args) -> int:
    state, model, meta = serialize.load_model(args.model)
    vocab = meta["vocabulary"]
    order = sorted(range(state.K), key=lambda k: (-model.eta[k], k))
    lines = []
    for rank, k in enumerate(order, start=1):
        lines.append(f"topic {rank} (coefficient {model.eta[k]:+.4f}, tokens {int(state.c_k[k])})")
        counts = state.c_kw[k]
        top = sorted(range(state.V), key=lambda w: (-counts[w], w))[: args.top]
        for w in top:
            if counts[w] == 0 and args.top <= state.V:
                break
            lines.append(f"  {vocab.terms[w]} ({int(counts[w])})")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shdp",
        description="Supervised hierarchical Dirichlet process topic regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="tokenized JSONL to encoded corpus")
    p.add_argument("input", help="input .jsonl file")
    p.add_argument("--out", required=True, help="output corpus JSON")
    p.add_argument("--report", required=True, help="pruning report JSON")
    p.add_argument("--keep", type=int, required=True, help="vocabulary size to keep")
    p.add_argument("--max-doc-frac", type=float, default=0.25)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--log-response", action="store_true")
    p.add_argument("--offset", type=float, default=1.0)
    p.set_defaults(func=cmd_preprocess)

    def add_model_flags(p, with_coeff=True):
        p.add_argument("--family", choices=[GAUSSIAN, BINOMIAL], default=GAUSSIAN)
        p.add_argument("--iters", type=int, default=2000)
        p.add_argument("--seed", type=int, default=0)
        if with_coeff:
            p.add_argument("--coeff", choices=["sample", "map"], default="sample")
        p.add_argument("--zeta", type=float, default=1.0, help="prior std unless --zeta-as-variance")
        p.add_argument("--zeta-as-variance", action="store_true")
        p.add_argument("--delta", type=float, default=0.5)
        p.add_argument("--alpha-w", dest="alpha_w", type=float, default=0.01)
        p.add_argument("--k0", type=int, default=1)
        p.add_argument("--table-rule", choices=["crt", "printed"], default="crt")

    p = sub.add_parser("train", help="train a supervised chain")
    p.add_argument("corpus", help="encoded corpus JSON")
    p.add_argument("--out", required=True, help="model snapshot JSON")
    p.add_argument("--trace", default=None, help="optional trace CSV")
    add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict responses for test documents")
    p.add_argument("model", help="model snapshot JSON")
    p.add_argument("corpus", help="encoded corpus JSON or raw .jsonl")
    p.add_argument("--out", required=True, help="predictions CSV")
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="k-fold cross-validation")
    p.add_argument("corpus", help="encoded corpus JSON")
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument(
        "--method",
        choices=["shdp-sampled", "shdp-map", "two-step"],
        default="shdp-sampled",
    )
    p.add_argument(
        "--zeta-grid",
        type=lambda s: [float(x) for x in s.split(",")],
        default=[1.0, 5.0, 10.0],
        help="comma-separated prior std values",
    )
    p.add_argument("--predict-iters", dest="predict_iters", type=int, default=500)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=100)
    p.add_argument("--select-iters", dest="select_iters", type=int, default=None)
    p.add_argument("--reference", default=None, help="reference report JSON for fold diffs")
    p.add_argument("--predictions", default=None, help="optional per-fold predictions CSV")
    p.add_argument("--timing", action="store_true", help="include runtimes in the report")
    add_model_flags(p, with_coeff=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diag", help="Gelman-Rubin shrink factor from trace CSVs")
    p.add_argument("traces", nargs="+", help="two or more trace CSVs")
    p.add_argument("--out", required=True, help="output CSV (iteration, rhat)")
    p.add_argument(
        "--statistic",
        choices=["eta_l2", "residual_l2", "K", "alpha", "gamma"],
        default="residual_l2",
    )
    p.add_argument("--step", type=int, default=50)
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("topics", help="dump topics ranked by coefficient")
    p.add_argument("model", help="model snapshot JSON")
    p.add_argument("--out", required=True, help="output text file")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_topics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
