"""Command-line driver.

Exit status: 0 on success, 1 on data or runtime errors, 2 on usage errors.
Every successful command that writes files also writes a JSON run manifest
next to its main output (``<out>.manifest.json``).
"""

import argparse
import hashlib
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import MovmfConfig, cbow_matrix, movmf_doc_inputs, movmf_features, movmf_fit
from .corpus import build_corpus, embed_tokens, load_embeddings, load_stopwords, preprocess, read_corpus_tsv
from .errors import SpmError
from .evaluation import EvalDataset, LinearConfig, kfold_cv, train_test_accuracy
from .io import atomic_write_text, format_repr_tsv, read_repr_tsv
from .model import (
    REPR_MODES,
    SpmConfig,
    _infer,
    doc_repr,
    fit,
    load_model,
    model_to_json,
    refresh_variational,
    state_repr,
)

logger = logging.getLogger("spmtext")


class UsageError(Exception):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path, args, argv, config, inputs, outputs, started):
    manifest = {
        "tool": "spmtext",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha256(p) for p in inputs if p is not None},
        "outputs": [str(p) for p in outputs],
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_seconds": round(time.time() - started, 6),
    }
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_inputs(args):
    table = load_embeddings(args.embeddings)
    stopwords = load_stopwords(args.stopwords)
    raw = read_corpus_tsv(args.corpus)
    return table, stopwords, raw


def _report_excluded(path, ids):
    atomic_write_text(path, "".join(f"{i}\tno in-vocabulary tokens\n" for i in ids))


def cmd_train(args, argv):
    started = time.time()
    cfg = SpmConfig(
        kappa0_init=args.kappa0,
        kappa_n_init_range=(args.kappa_n_lo, args.kappa_n_hi),
        max_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
        infer_rounds=args.infer_rounds,
    )
    table, stopwords, raw = _load_inputs(args)
    corpus, report = build_corpus(raw, table, stopwords)
    if report.excluded:
        logger.warning("%d of %d documents have no in-vocabulary tokens and were excluded",
                       len(report.excluded), report.n_input)
    cfg.K = table.dim
    model, trace = fit(corpus, cfg)
    refresh_variational(model, corpus)
    out = Path(args.out)
    outputs = [out]
    atomic_write_text(out, model_to_json(model))

    elbo_path = out.with_name(out.name + ".elbo.tsv")
    lines = ["iter\telbo\tdelta"]
    for i, value in enumerate(trace.elbo):
        delta = "" if i == 0 else repr(value - trace.elbo[i - 1])
        lines.append(f"{i}\t{value!r}\t{delta}")
    atomic_write_text(elbo_path, "\n".join(lines) + "\n")
    outputs.append(elbo_path)

    excluded_path = out.with_name(out.name + ".excluded.tsv")
    _report_excluded(excluded_path, report.excluded)
    outputs.append(excluded_path)

    if args.repr_out:
        X = doc_repr(model, mode=args.mode)
        atomic_write_text(args.repr_out, format_repr_tsv(corpus.ids, corpus.labels, X))
        outputs.append(Path(args.repr_out))

    for w in trace.warnings:
        logger.warning(w)
    print(f"trained on {len(corpus)} documents (K={model.dim}): {trace.iterations} iterations, "
          f"converged={trace.converged}, elbo={trace.elbo[-1]:.6f}")
    _write_manifest(out.with_name(out.name + ".manifest.json"), args, argv, cfg.to_dict(),
                    [args.embeddings, args.corpus, args.stopwords], outputs, started)
    return 0


def cmd_infer(args, argv):
    started = time.time()
    model = load_model(args.model)
    table, stopwords, raw = _load_inputs(args)
    fp = table.fingerprint()
    if fp != model.fingerprint:
        raise SpmError(f"embedding fingerprint mismatch: model {model.fingerprint}, "
                       f"embeddings {args.embeddings} {fp}")
    ids, labels, sums, lengths, skipped = [], [], [], [], []
    for doc_id, label, text in raw:
        tokens = embed_tokens(preprocess(text, stopwords), table)
        if len(tokens) == 0:
            skipped.append(doc_id)
            continue
        ids.append(doc_id)
        labels.append(label)
        sums.append(table.vectors[tokens].sum(axis=0))
        lengths.append(float(len(tokens)))
    out = Path(args.out)
    if ids:
        mu, kappa, _ = _infer(model, np.array(sums), np.array(lengths))
        X = state_repr(mu, kappa, args.mode)
    else:
        X = np.zeros((0, model.dim))
    atomic_write_text(out, format_repr_tsv(ids, labels, X))
    skipped_path = out.with_name(out.name + ".skipped.tsv")
    _report_excluded(skipped_path, skipped)
    if skipped:
        logger.warning("%d documents could not be embedded; see %s", len(skipped), skipped_path)
    print(f"inferred {len(ids)} documents, skipped {len(skipped)}")
    _write_manifest(out.with_name(out.name + ".manifest.json"), args, argv,
                    {"mode": args.mode, "model_config": model.config.to_dict()},
                    [args.model, args.embeddings, args.corpus, args.stopwords],
                    [out, skipped_path], started)
    return 0


def _dataset(path):
    ids, labels, X = read_repr_tsv(path)
    if not ids:
        raise SpmError(f"{path}: no rows")
    return EvalDataset.from_labels(X, labels)


def cmd_eval(args, argv):
    started = time.time()
    cfg = LinearConfig(loss=args.loss, l2=args.l2, epochs=args.epochs, lr0=args.lr0,
                       batch_size=args.batch_size, seed=args.seed)
    if args.train or args.test:
        if not (args.train and args.test):
            raise UsageError("--train and --test must be given together")
        _, train_labels, Xtr = read_repr_tsv(args.train)
        _, test_labels, Xte = read_repr_tsv(args.test)
        both = EvalDataset.from_labels(np.vstack([Xtr, Xte]), list(train_labels) + list(test_labels))
        n = len(train_labels)
        train, test = both.subset(slice(0, n)), both.subset(slice(n, None))
        result = {"mode": "train-test", "accuracy": train_test_accuracy(train, test, cfg),
                  "n_train": n, "n_test": len(test_labels)}
        inputs = [args.train, args.test]
    else:
        if not args.repr:
            raise UsageError("--repr is required unless --train/--test are given")
        data = _dataset(args.repr)
        cv = kfold_cv(data, args.folds, cfg, seed=args.seed)
        result = {"mode": "kfold", "folds": args.folds, "mean_accuracy": cv.mean_accuracy,
                  "fold_accuracies": cv.fold_accuracies, "n": len(data)}
        inputs = [args.repr]
    if args.json:
        print(json.dumps(result, sort_keys=True))
    elif result["mode"] == "kfold":
        print(f"mean_accuracy\t{result['mean_accuracy']:.6f}")
        for i, a in enumerate(result["fold_accuracies"]):
            print(f"fold_{i}\t{a:.6f}")
    else:
        print(f"accuracy\t{result['accuracy']:.6f}")
    if args.manifest:
        _write_manifest(args.manifest, args, argv, {"classifier": vars(cfg).copy()}, inputs, [],
                        started)
    return 0


def cmd_export_baseline(args, argv):
    started = time.time()
    table, stopwords, raw = _load_inputs(args)
    corpus, report = build_corpus(raw, table, stopwords)
    config = {"method": args.method}
    if args.method == "cbow":
        X = cbow_matrix(corpus)
    else:
        mcfg = MovmfConfig(seed=args.seed, shared_kappa=args.shared_kappa)
        points = movmf_doc_inputs(corpus)
        mixture, trace = movmf_fit(points, args.clusters, mcfg)
        X = movmf_features(mixture, points)
        config.update(clusters=args.clusters, seed=args.seed, shared_kappa=args.shared_kappa,
                      iterations=trace.iterations)
    out = Path(args.out)
    atomic_write_text(out, format_repr_tsv(corpus.ids, corpus.labels, X))
    excluded_path = out.with_name(out.name + ".skipped.tsv")
    _report_excluded(excluded_path, report.excluded)
    print(f"wrote {args.method} vectors for {len(corpus)} documents")
    _write_manifest(out.with_name(out.name + ".manifest.json"), args, argv, config,
                    [args.embeddings, args.corpus, args.stopwords], [out, excluded_path], started)
    return 0


def cmd_replay(args, argv):
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    replay_argv = manifest["argv"]
    if replay_argv and replay_argv[0] == "replay":
        raise UsageError("refusing to replay a replay manifest")
    return main(replay_argv)


def _positive_int(lo):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if value < lo:
            raise argparse.ArgumentTypeError(f"must be at least {lo}")
        return value
    return parse


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spmtext", description="Spherical paragraph model: train, infer, evaluate.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_text_inputs(p):
        p.add_argument("--embeddings", required=True, help="word2vec text-format embeddings")
        p.add_argument("--corpus", required=True, help="TSV: id<TAB>label<TAB>text")
        p.add_argument("--stopwords", default=None, help="one stopword per line (default: bundled English list)")

    p = sub.add_parser("train", help="fit the spherical paragraph model")
    add_text_inputs(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--kappa0", type=float, default=1500.0)
    p.add_argument("--kappa-n-lo", type=float, default=1000.0)
    p.add_argument("--kappa-n-hi", type=float, default=1500.0)
    p.add_argument("--max-iters", type=_positive_int(1), default=100)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--infer-rounds", type=_positive_int(1), default=10)
    p.add_argument("--repr-out", default=None, help="also write training representations (TSV)")
    p.add_argument("--mode", choices=REPR_MODES, default="mean-direction")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="infer representations with a trained model")
    p.add_argument("--model", required=True)
    add_text_inputs(p)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=REPR_MODES, default="mean-direction")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="linear classification accuracy of representations")
    p.add_argument("--repr", default=None, help="representation TSV for k-fold CV")
    p.add_argument("--folds", type=_positive_int(2), default=10)
    p.add_argument("--train", default=None)
    p.add_argument("--test", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss", choices=("hinge", "logistic"), default="hinge")
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--epochs", type=_positive_int(1), default=30)
    p.add_argument("--lr0", type=float, default=0.5)
    p.add_argument("--batch-size", type=_positive_int(1), default=8)
    p.add_argument("--json", action="store_true", help="print one JSON object")
    p.add_argument("--manifest", default=None, help="write a run manifest here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-baseline", help="write cBow or movMF baseline representations")
    add_text_inputs(p)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("cbow", "movmf"), required=True)
    p.add_argument("--clusters", type=_positive_int(1), default=50)
    p.add_argument("--shared-kappa", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_export_baseline)

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"spmtext: error: {exc}", file=sys.stderr)
        return 2
    except (SpmError, OSError, ValueError) as exc:
        print(f"spmtext: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
