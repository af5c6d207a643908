"""
Synthetic Corpus Generator

Writes a planted-topic labeled corpus (`label<TAB>text`) and a matching toy
embedding table, ready for `fednmf prepare` and `fednmf eval`.

Usage (from repo root):
  python scripts/make_synthetic_corpus.py --out-dir data/synthetic --docs 2000 --classes 4
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from fednmf.corpus import build_vocabulary
from fednmf.synthetic import cluster_embeddings, planted_corpus, write_corpus, write_embeddings


def main() -> int:
    parser = argparse.ArgumentParser(description="Generate a planted-topic corpus and toy embeddings")
    parser.add_argument("--out-dir", default="data/synthetic")
    parser.add_argument("--docs", type=int, default=2000)
    parser.add_argument("--classes", type=int, default=4)
    parser.add_argument("--dim", type=int, default=16, help="Embedding dimension")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    docs, label_names = planted_corpus(num_docs=args.docs, num_classes=args.classes, seed=args.seed)
    corpus_path = write_corpus(docs, label_names, out_dir / "corpus.tsv")
    vocab = build_vocabulary(docs)
    embeddings_path = write_embeddings(
        cluster_embeddings(vocab, dim=max(args.dim, args.classes), seed=args.seed), out_dir / "embeddings.txt"
    )
    print(f"✓ Wrote {corpus_path} ({len(docs)} documents, {len(label_names)} labels)")
    print(f"✓ Wrote {embeddings_path} ({vocab.V} words)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
