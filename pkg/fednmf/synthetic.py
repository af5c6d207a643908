"""
Synthetic Data Generators

Small corpora and matrices with known structure for tests and experiment
scripts:

- planted_corpus: labeled documents mixing class-specific and shared terms
- low_rank_matrix: A = W* H* with nonnegative uniform factors
- balanced_label_matrix: label-only corpus for partition statistics
- cluster_embeddings: embedding table whose class terms point in a shared direction
"""

from pathlib import Path
from typing import Dict, List, Mapping, Tuple

import numpy as np
from scipy import sparse

from models import CountMatrix, Document, Vocabulary


def class_term(label: int, i: int) -> str:
    return f"c{label}w{i}"


def background_term(i: int) -> str:
    return f"bg{i}"


def planted_corpus(
    num_docs: int = 2000,
    num_classes: int = 4,
    terms_per_class: int = 25,
    background_terms: int = 50,
    doc_length: Tuple[int, int] = (8, 24),
    class_share: float = 0.6,
    seed: int = 0,
) -> Tuple[List[Document], List[str]]:
    """
    Balanced labeled corpus with one term block per class.

    Each token comes from the document's class block with probability
    class_share, otherwise from the shared background block.

    Returns:
        (documents, label_names)
    """
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(num_docs) % num_classes)
    docs = []
    for j, label in enumerate(labels):
        length = int(rng.integers(doc_length[0], doc_length[1] + 1))
        from_class = rng.random(length) < class_share
        tokens = [
            class_term(int(label), int(rng.integers(terms_per_class))) if own
            else background_term(int(rng.integers(background_terms)))
            for own in from_class
        ]
        docs.append(Document(id=f"doc-{j + 1}", text=" ".join(tokens), label=int(label)))
    return docs, [f"class{c}" for c in range(num_classes)]


def low_rank_matrix(
    V: int = 30, N: int = 200, k: int = 5, seed: int = 0
) -> Tuple[CountMatrix, np.ndarray, np.ndarray]:
    """
    A = W* H* with W* (V x k) and H* (k x N) drawn from U[0, 1).

    Returns:
        (A, W_star, H_star)
    """
    rng = np.random.default_rng(seed)
    W_star = rng.random((V, k))
    H_star = rng.random((k, N))
    return CountMatrix.from_dense(W_star @ H_star), W_star, H_star


def balanced_label_matrix(num_docs: int, num_classes: int, V: int = 1) -> CountMatrix:
    """Corpus whose columns only matter for their labels (j mod num_classes); every column counts term 0 once"""
    data = sparse.csc_matrix(
        (np.ones(num_docs), (np.zeros(num_docs, dtype=np.int64), np.arange(num_docs))),
        shape=(V, num_docs),
    )
    return CountMatrix(
        data=data,
        doc_ids=tuple(f"doc-{j}" for j in range(num_docs)),
        labels=np.arange(num_docs) % num_classes,
    )


def cluster_embeddings(vocab: Vocabulary, dim: int = 16, noise: float = 0.3, seed: int = 0) -> Dict[str, np.ndarray]:
    """
    Vectors for planted-corpus terms.

    Terms of class c lie near the c-th basis direction; background terms are random.
    """
    rng = np.random.default_rng(seed)
    vectors = {}
    for term in vocab.terms:
        if term.startswith("c") and "w" in term:
            label = int(term[1:term.index("w")])
            base = np.zeros(dim)
            base[label % dim] = 1.0
            vectors[term] = base + noise * rng.standard_normal(dim)
        else:
            vectors[term] = rng.standard_normal(dim)
    return vectors


def write_embeddings(vectors: Mapping[str, np.ndarray], path: Path) -> Path:
    """`word v1 ... vd` per line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [" ".join([word] + [repr(float(x)) for x in vec]) for word, vec in vectors.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_corpus(docs: List[Document], label_names: List[str], path: Path) -> Path:
    """`label<TAB>text` per line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{label_names[d.label]}\t{d.text}\n" for d in docs), encoding="utf-8")
    return path
