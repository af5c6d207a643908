"""
Corpus Preparation Module

Turns labeled raw text into vocabularies, sparse count matrices and
train/test splits, and reads/writes the plain-text corpus formats:

- Corpus file: `label<TAB>text`, one document per line
- Stopword file: one token per line
- Count matrix: header `V N`, then one `j nnz idx:count ...` line per column,
  with `<matrix>.vocab` and `<matrix>.labels` sidecar files
"""

import logging
import re
from collections import Counter
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import sparse

from fednmf.errors import DegenerateSplit, EmptyVocabulary, MalformedFile
from models import CountMatrix, Document, Vocabulary

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str, stopwords: Iterable[str] = ()) -> List[str]:
    """
    Lowercase, split on non-alphanumeric runs, drop stopwords and 1-char tokens.

    Args:
        text: Raw document text
        stopwords: Tokens to remove (compared after lowercasing)

    Returns:
        List of tokens in document order
    """
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    return [tok for tok in _TOKEN_RE.findall(text.lower()) if len(tok) > 1 and tok not in stop]


def build_vocabulary(
    docs: Sequence[Document],
    stopwords: Iterable[str] = (),
    min_count: int = 1,
) -> Vocabulary:
    """
    Collect every token with corpus frequency >= min_count, in first-appearance order.

    Raises:
        ValueError: If min_count < 1
        EmptyVocabulary: If no token survives the frequency cut
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    stop = set(stopwords)
    counts: Counter = Counter()
    for doc in docs:
        # Counter keeps insertion order, which is first appearance
        counts.update(tokenize(doc.text, stop))
    terms = tuple(term for term, n in counts.items() if n >= min_count)
    if not terms:
        raise EmptyVocabulary(f"Vocabulary is empty: no token reaches min_count={min_count}")
    logger.info("Built vocabulary of %d terms from %d documents", len(terms), len(docs))
    return Vocabulary(terms)


def vectorize(
    docs: Sequence[Document],
    vocab: Vocabulary,
    stopwords: Iterable[str] = (),
) -> Tuple[CountMatrix, List[int]]:
    """
    Count in-vocabulary tokens per document.

    Returns:
        (matrix, flagged) where flagged lists the columns with no in-vocabulary token.
        Flagged documents stay in the matrix so columns keep aligning with labels.
    """
    if vocab.V == 0:
        raise EmptyVocabulary("Cannot vectorize against an empty vocabulary")
    stop = set(stopwords)
    rows, cols, vals = [], [], []
    flagged = []
    for j, doc in enumerate(docs):
        counts = Counter(vocab.index[tok] for tok in tokenize(doc.text, stop) if tok in vocab.index)
        if not counts:
            flagged.append(j)
            continue
        for idx in sorted(counts):
            rows.append(idx)
            cols.append(j)
            vals.append(counts[idx])
    data = sparse.csc_matrix(
        (np.asarray(vals, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(vocab.V, len(docs)),
    )
    matrix = CountMatrix(
        data=data,
        doc_ids=tuple(doc.id for doc in docs),
        labels=np.asarray([doc.label for doc in docs], dtype=np.int64),
    )
    if flagged:
        logger.warning("%d of %d documents have no in-vocabulary token", len(flagged), len(docs))
    return matrix, flagged


def split_train_test(matrix: CountMatrix, ratio: float, seed: int) -> Tuple[CountMatrix, CountMatrix]:
    """
    Disjoint random column split; train receives round(ratio * N) columns.

    Each side keeps its columns in ascending original order.

    Raises:
        ValueError: If ratio is not strictly between 0 and 1
        DegenerateSplit: If either side would be empty
    """
    if not 0 < ratio < 1:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    n_train = round(ratio * matrix.N)
    if n_train == 0 or n_train == matrix.N:
        raise DegenerateSplit(
            f"Split of N={matrix.N} at ratio={ratio} leaves an empty side ({n_train}/{matrix.N - n_train})"
        )
    perm = np.random.default_rng(seed).permutation(matrix.N)
    train_cols = np.sort(perm[:n_train])
    test_cols = np.sort(perm[n_train:])
    return matrix.select(train_cols), matrix.select(test_cols)


# --- File formats ---

def load_corpus(path: Path) -> Tuple[List[Document], List[str]]:
    """
    Read a `label<TAB>text` corpus file.

    Labels are mapped to dense ids in sorted label-string order; document ids
    are `doc-<line number>` (1-based, counting non-blank lines only).

    Returns:
        (documents, label_names) where label_names[i] is the string for id i
    """
    path = Path(path)
    raw = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if "\t" not in line:
                raise MalformedFile(f"{path}:{lineno}: expected 'label<TAB>text'")
            label, text = line.split("\t", 1)
            raw.append((label.strip(), text))
    label_names = sorted({label for label, _ in raw})
    label_ids = {name: i for i, name in enumerate(label_names)}
    docs = [Document(id=f"doc-{i + 1}", text=text, label=label_ids[label]) for i, (label, text) in enumerate(raw)]
    logger.info("Loaded %d documents with %d labels from %s", len(docs), len(label_names), path)
    return docs, label_names


def load_stopwords(path: Path) -> Set[str]:
    """One token per line; blank lines ignored, tokens lowercased"""
    with Path(path).open(encoding="utf-8") as fh:
        return {line.strip().lower() for line in fh if line.strip()}


def _sidecar(path: Path, suffix: str) -> Path:
    return Path(f"{path}.{suffix}")


def _fmt_count(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def save_count_matrix(
    matrix: CountMatrix,
    path: Path,
    vocab: Optional[Vocabulary] = None,
    label_names: Optional[Sequence[str]] = None,
) -> Path:
    """
    Write the count matrix text format plus `.vocab` and `.labels` sidecars.

    Returns:
        Path of the matrix file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{matrix.V} {matrix.N}"]
    for j in range(matrix.N):
        indices, values = matrix.column(j)
        entries = " ".join(f"{i}:{_fmt_count(v)}" for i, v in zip(indices, values))
        lines.append(f"{j} {len(indices)} {entries}".rstrip())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    if vocab is not None:
        if vocab.V != matrix.V:
            raise ValueError(f"Vocabulary has {vocab.V} terms but matrix has V={matrix.V}")
        _sidecar(path, "vocab").write_text("".join(f"{t}\n" for t in vocab.terms), encoding="utf-8")

    label_lines = []
    for doc_id, label in zip(matrix.doc_ids, matrix.labels):
        name = label_names[label] if label_names is not None else str(label)
        label_lines.append(f"{doc_id}\t{label}\t{name}\n")
    _sidecar(path, "labels").write_text("".join(label_lines), encoding="utf-8")
    return path


def load_count_matrix(path: Path) -> CountMatrix:
    """
    Read a matrix written by save_count_matrix.

    Doc ids and labels come from the `.labels` sidecar when present, otherwise
    columns are named `doc-<j>` with label 0.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise MalformedFile(f"{path}:1: expected header 'V N'")
        V, N = int(header[0]), int(header[1])
        rows, cols, vals = [], [], []
        seen = 0
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            try:
                j, nnz = int(parts[0]), int(parts[1])
                entries = [p.split(":") for p in parts[2:]]
                if len(entries) != nnz or j != seen:
                    raise ValueError
                for idx, count in entries:
                    idx = int(idx)
                    if not 0 <= idx < V:
                        raise ValueError
                    rows.append(idx)
                    cols.append(j)
                    vals.append(float(count))
            except (ValueError, IndexError):
                raise MalformedFile(f"{path}:{lineno}: malformed column line")
            seen += 1
    if seen != N:
        raise MalformedFile(f"{path}: header declares N={N} but file has {seen} columns")

    data = sparse.csc_matrix((vals, (rows, cols)), shape=(V, N), dtype=np.float64)
    labels_path = _sidecar(path, "labels")
    if labels_path.exists():
        doc_ids, labels, _ = _read_labels(labels_path)
        if len(doc_ids) != N:
            raise MalformedFile(f"{labels_path}: has {len(doc_ids)} rows for N={N}")
    else:
        doc_ids, labels = [f"doc-{j}" for j in range(N)], [0] * N
    return CountMatrix(data=data, doc_ids=tuple(doc_ids), labels=np.asarray(labels, dtype=np.int64))


def _read_labels(path: Path) -> Tuple[List[str], List[int], List[str]]:
    doc_ids, labels, names = [], [], []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise MalformedFile(f"{path}:{lineno}: expected 'doc_id<TAB>label_id<TAB>label_name'")
            doc_ids.append(parts[0])
            labels.append(int(parts[1]))
            names.append(parts[2])
    return doc_ids, labels, names


def load_vocabulary(path: Path) -> Vocabulary:
    """One term per line, in index order"""
    with Path(path).open(encoding="utf-8") as fh:
        return Vocabulary(tuple(line.rstrip("\n") for line in fh if line.strip()))


def load_matrix_vocabulary(path: Path) -> Vocabulary:
    """Vocabulary from the `.vocab` sidecar of a matrix file"""
    return load_vocabulary(_sidecar(Path(path), "vocab"))


def load_label_names(path: Path) -> List[str]:
    """Label names indexed by label id, from the `.labels` sidecar"""
    _, labels, names = _read_labels(_sidecar(Path(path), "labels"))
    by_id = dict(zip(labels, names))
    return [by_id.get(i, str(i)) for i in range(max(by_id, default=-1) + 1)]
