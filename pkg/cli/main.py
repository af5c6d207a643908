"""
Command-Line Entry Point

Binds the pipeline: prepare -> partition -> train -> eval, plus sweep.

Usage:
  fednmf prepare --corpus data/corpus.tsv --stopwords data/stop.txt --out data/matrix.txt
  fednmf prepare --corpus data/corpus.tsv --out data/matrix.txt --test-ratio 0.2
  fednmf partition --matrix data/matrix.txt --K 10 --alpha 1.0 --out data/shards.txt
  fednmf train --config run.json --threads 4 --checkpoint-every 10
  fednmf eval --checkpoint runs/latest/topic_model.txt --embeddings glove.txt --mode both
  fednmf sweep --config grid.json --jobs 4

Every command is non-interactive and exits nonzero on error with a one-line
diagnostic on stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from fednmf import checkpoint, corpus, evaluation, partition
from fednmf.config import EVAL_CONFIG, PartitionSpec, TrainConfig
from fednmf.errors import FedNmfError, SingleClass, VocabularyMismatch
from fednmf.federation import run_training
from fednmf.manifest import build_manifest, config_hash, load_manifest, write_manifest
from fednmf.metrics_log import MetricsLog

logger = logging.getLogger(__name__)

MATRIX_SIDECARS = ("vocab", "labels")


def format_validation_error(error: ValidationError) -> str:
    """All invalid fields on one line: `field: message; field: message`"""
    parts = []
    for item in error.errors():
        field = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{field}: {item['msg']}")
    return "invalid config: " + "; ".join(parts)


def _resolve(base: Path, value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def load_train_config(path: Path, overrides: Optional[Dict[str, Any]] = None) -> TrainConfig:
    """
    Read a JSON run config; relative input paths resolve against the config's directory.

    Raises:
        ValidationError: Listing every invalid field
    """
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    for key in ("matrix", "shards"):
        if isinstance(data.get(key), str):
            data[key] = _resolve(path.parent, data[key])
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return TrainConfig.model_validate(data)


def _matrix_inputs(matrix_path: Path) -> List[Path]:
    paths = [Path(matrix_path)]
    for suffix in MATRIX_SIDECARS:
        sidecar = Path(f"{matrix_path}.{suffix}")
        if sidecar.exists():
            paths.append(sidecar)
    return paths


# --- Commands ---

def cmd_prepare(args: argparse.Namespace) -> int:
    docs, label_names = corpus.load_corpus(args.corpus)
    stopwords = corpus.load_stopwords(args.stopwords) if args.stopwords else set()
    vocab = corpus.build_vocabulary(docs, stopwords, args.min_count)
    matrix, flagged = corpus.vectorize(docs, vocab, stopwords)
    out = corpus.save_count_matrix(matrix, args.out, vocab=vocab, label_names=label_names)
    outputs = {"matrix": out, "vocab": Path(f"{out}.vocab"), "labels": Path(f"{out}.labels")}
    settings = {"min_count": args.min_count}

    if args.test_ratio is not None:
        # both sides share the full corpus vocabulary
        train, test = corpus.split_train_test(matrix, 1.0 - args.test_ratio, args.split_seed)
        for side, part in (("train", train), ("test", test)):
            outputs[side] = corpus.save_count_matrix(part, Path(f"{out}.{side}"), vocab=vocab, label_names=label_names)
            print(f"✓ Wrote {outputs[side]} (N={part.N})")
        settings.update(test_ratio=args.test_ratio, split_seed=args.split_seed)

    inputs = [Path(args.corpus)] + ([Path(args.stopwords)] if args.stopwords else [])
    manifest = build_manifest("prepare", settings, inputs=inputs, outputs=outputs)
    write_manifest(manifest, Path(f"{out}.manifest.json"))
    print(f"✓ Wrote {out} (V={matrix.V}, N={matrix.N}, empty documents={len(flagged)})")
    return 0


def cmd_partition(args: argparse.Namespace) -> int:
    matrix = corpus.load_count_matrix(args.matrix)
    spec = PartitionSpec(K=args.K, alpha=args.alpha, seed=args.seed, allocation=args.allocation)
    shards = partition.partition_clients(matrix, spec)
    out = partition.write_shard_manifest(shards, args.out)
    manifest = build_manifest(
        "partition", spec, inputs=_matrix_inputs(args.matrix), outputs={"shards": out}, master_seed=args.seed,
    )
    write_manifest(manifest, Path(f"{out}.manifest.json"))
    print(f"✓ Wrote {out} ({len(shards)} clients x {shards[0].size} documents)")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_train_config(args.config, {
        "master_seed": args.seed,
        "out_dir": args.out_dir,
        "threads": args.threads,
        "checkpoint_every": args.checkpoint_every,
    })
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    matrix = corpus.load_count_matrix(cfg.matrix)
    inputs = _matrix_inputs(cfg.matrix)
    if cfg.shards is not None:
        shards = partition.read_shard_manifest(cfg.shards, matrix)
        inputs.append(Path(cfg.shards))
        shards_path = Path(cfg.shards)
    else:
        shards = partition.partition_clients(matrix, cfg.partition_spec())
        shards_path = partition.write_shard_manifest(shards, out_dir / "shards.txt")

    outputs = {
        "metrics": out_dir / "metrics.jsonl",
        "topic_model": out_dir / "topic_model.txt",
        "critic": out_dir / "critic.txt",
        "doc_topics": out_dir / "doc_topics.txt",
        "shards": shards_path,
    }
    run_hash = config_hash(cfg.identity())
    manifest = build_manifest("train", cfg, inputs=inputs, outputs=outputs, master_seed=cfg.master_seed)
    manifest.config_hash = run_hash
    write_manifest(manifest, out_dir / "manifest.json")

    def evaluate(server, clients):
        try:
            return evaluation.classify_clients(clients, seed=cfg.master_seed).macro_f1
        except SingleClass as e:
            logger.warning("Skipping downstream F1 at round %d: %s", server.round, e)
            return None

    with MetricsLog(outputs["metrics"], run_hash) as log:
        def on_round(metrics, server, clients):
            log.append(metrics)
            if cfg.checkpoint_every and metrics.round and metrics.round % cfg.checkpoint_every == 0:
                round_dir = out_dir / "checkpoints" / f"round-{metrics.round:04d}"
                checkpoint.save_topic_model(server.model, round_dir / "topic_model.txt")
                checkpoint.save_critic(server.critic, round_dir / "critic.txt")

        result = run_training(
            matrix, shards, cfg,
            threads=cfg.threads,
            on_round=on_round,
            evaluate=evaluate if cfg.eval_every else None,
            eval_every=cfg.eval_every,
        )

    checkpoint.save_topic_model(result.model, outputs["topic_model"])
    checkpoint.save_critic(result.critic, outputs["critic"])
    checkpoint.save_doc_topics(result.clients, outputs["doc_topics"])
    final = result.history[-1]
    print(f"✓ Trained {cfg.rounds} rounds: loss={final.mean_recon_loss:.6g} bytes={final.cumulative_comm_bytes}")
    print(f"✓ Wrote {out_dir}")
    return 0


def _eval_config_hash(args: argparse.Namespace, checkpoint_path: Path) -> str:
    manifest_path = checkpoint_path.parent / "manifest.json"
    if manifest_path.exists():
        return load_manifest(manifest_path).config_hash
    return config_hash({k: str(v) for k, v in sorted(vars(args).items()) if k != "func"})


def _run_matrix(checkpoint_path: Path) -> Optional[Path]:
    """Training matrix recorded in the run manifest next to the checkpoint"""
    manifest_path = checkpoint_path.parent / "manifest.json"
    if not manifest_path.exists():
        return None
    matrix = load_manifest(manifest_path).config.get("matrix")
    return Path(matrix) if matrix else None


def _check_test_vocabulary(args: argparse.Namespace, checkpoint_path: Path, test_matrix: Path) -> None:
    """
    The held-out matrix must index the training vocabulary term for term.

    Raises:
        VocabularyMismatch: If the vocabularies differ or either one cannot be found
    """
    if args.vocab:
        train_vocab_path = Path(args.vocab)
    else:
        run_matrix = _run_matrix(checkpoint_path)
        if run_matrix is None:
            raise VocabularyMismatch("--features foldin needs --vocab or a run manifest naming the training matrix")
        train_vocab_path = Path(f"{run_matrix}.vocab")
    test_vocab_path = Path(f"{test_matrix}.vocab")
    if not test_vocab_path.exists():
        raise VocabularyMismatch(f"{test_matrix} has no .vocab sidecar to check against {train_vocab_path}")
    train_terms = corpus.load_vocabulary(train_vocab_path).terms
    test_terms = corpus.load_vocabulary(test_vocab_path).terms
    if train_terms != test_terms:
        raise VocabularyMismatch(f"{test_vocab_path} does not match the training vocabulary {train_vocab_path}")


def _class_names(checkpoint_path: Path, classes) -> Dict[str, str]:
    run_matrix = _run_matrix(checkpoint_path)
    if run_matrix is None or not Path(f"{run_matrix}.labels").exists():
        return {}
    names = corpus.load_label_names(run_matrix)
    return {str(c): names[c] for c in classes if 0 <= c < len(names)}


def cmd_eval(args: argparse.Namespace) -> int:
    checkpoint_path = Path(args.checkpoint)
    out_dir = Path(args.out_dir) if args.out_dir else checkpoint_path.parent
    model = checkpoint.load_topic_model(checkpoint_path)
    run_hash = _eval_config_hash(args, checkpoint_path)
    coherence = f1 = acc = None

    if args.mode in ("coherence", "both"):
        vocab_path = args.vocab
        if vocab_path is None:
            raise FedNmfError("coherence needs --vocab (a vocabulary file, one term per line)")
        vocab = corpus.load_vocabulary(vocab_path)
        embeddings = evaluation.load_embeddings(args.embeddings)
        report = evaluation.model_coherence(model.W, vocab, embeddings, n=args.top_n)
        path = evaluation.write_report(out_dir / "topic_report.json", report, run_hash, embeddings_skipped=embeddings.skipped)
        coherence = report.mean_coherence
        print(f"✓ Wrote {path}")

    if args.mode in ("classify", "both"):
        doc_topics = Path(args.doc_topics) if args.doc_topics else checkpoint_path.parent / "doc_topics.txt"
        _, labels, features = checkpoint.load_doc_topics(doc_topics)
        if args.features == "train":
            report = evaluation.train_classifier(features, labels, split_ratio=args.split_ratio, seed=args.seed)
        else:
            if args.test_matrix is None:
                raise FedNmfError("--features foldin needs --test-matrix")
            _check_test_vocabulary(args, checkpoint_path, Path(args.test_matrix))
            test = corpus.load_count_matrix(args.test_matrix)
            X_test, y_test = evaluation.document_features([], W=model.W, matrix=test, mode="foldin")
            report = evaluation.fit_and_score(features, labels, X_test, y_test)
        path = evaluation.write_report(
            out_dir / "classification_report.json", report, run_hash, features=args.features,
            class_names=_class_names(checkpoint_path, report.per_class),
        )
        f1, acc = report.macro_f1, report.accuracy
        print(f"✓ Wrote {path}")

    summary = []
    if coherence is not None:
        summary.append(f"coherence={coherence:.6f}")
    if f1 is not None:
        summary.append(f"macro_f1={f1:.6f} acc={acc:.6f}")
    print(" ".join(summary))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    from cli.sweep import run_sweep

    rows = run_sweep(Path(args.config), jobs=args.jobs, out=args.out, threads=args.threads)
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"✓ Swept {len(rows)} cells ({failed} failed)")
    return 0


# --- Parser ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fednmf", description="Federated NMF topic modeling")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log progress at INFO level")
    parser.add_argument("-q", "--quiet", action="store_true", help="Log errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="Corpus file -> count matrix with vocab/labels sidecars")
    p.add_argument("--corpus", required=True, help="label<TAB>text file")
    p.add_argument("--stopwords", default=None, help="One stopword per line")
    p.add_argument("--min-count", type=int, default=1, help="Minimum corpus frequency of a term")
    p.add_argument("--test-ratio", type=float, default=None,
                   help="Also write <out>.train and <out>.test, holding out this share of documents")
    p.add_argument("--split-seed", type=int, default=0, help="Seed of the train/test split")
    p.add_argument("--out", required=True, help="Output matrix path")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("partition", help="Dirichlet label-skew client shards")
    p.add_argument("--matrix", required=True)
    p.add_argument("--K", type=int, required=True, help="Number of clients")
    p.add_argument("--alpha", type=float, default=1.0, help="Dirichlet concentration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allocation", choices=("quota", "sample"), default="quota")
    p.add_argument("--out", required=True, help="Shard manifest path")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("train", help="Run federated training from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="Override master_seed")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--threads", type=int, default=None, help="Parallel client updates")
    p.add_argument("--checkpoint-every", type=int, default=None, help="Checkpoint every R rounds (0 = off)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Coherence and/or downstream classification of a trained model")
    p.add_argument("--checkpoint", required=True, help="Topic model file")
    p.add_argument("--vocab", default=None, help="Vocabulary file (the matrix's .vocab sidecar)")
    p.add_argument("--embeddings", default=None, help="word v1 ... vd embedding file")
    p.add_argument("--mode", choices=("coherence", "classify", "both"), default="both")
    p.add_argument("--features", choices=evaluation.FEATURE_MODES, default="train")
    p.add_argument("--doc-topics", default=None, help="Defaults to doc_topics.txt next to the checkpoint")
    p.add_argument("--test-matrix", default=None, help="Held-out documents for --features foldin")
    p.add_argument("--top-n", type=int, default=EVAL_CONFIG["top_n"])
    p.add_argument("--split-ratio", type=float, default=EVAL_CONFIG["split_ratio"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="Cartesian grid of training runs -> CSV table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="Override the grid's output CSV path")
    p.add_argument("--jobs", type=int, default=1, help="Cells run in parallel worker processes")
    p.add_argument("--threads", type=int, default=None, help="Client threads inside each cell")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval" and args.mode in ("coherence", "both") and not args.embeddings:
        parser.error(f"--mode {args.mode} requires --embeddings")

    level = logging.INFO if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {format_validation_error(e)}", file=sys.stderr)
    except (ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
