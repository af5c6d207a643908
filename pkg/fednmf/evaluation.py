"""
Topic Quality Evaluation

1. Word-embedding (WE) coherence - mean pairwise cosine similarity of each
   topic's top words under pretrained embeddings
2. Downstream classification - multinomial logistic regression on topic-weight
   vectors, reported as macro-F1 and accuracy
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.metrics import accuracy_score, f1_score, precision_recall_fscore_support
from sklearn.metrics.pairwise import cosine_similarity
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import normalize
from sklearn.utils.validation import check_is_fitted

from fednmf.config import EVAL_CONFIG
from fednmf.errors import (
    EmptyTable,
    InconsistentDimension,
    NoScorableTopics,
    SingleClass,
    TooFewEmbeddedWords,
)
from fednmf.factorization import infer_topics_batch
from models import (
    ClassificationReport,
    ClientState,
    CountMatrix,
    EmbeddingTable,
    TopicReport,
    Vocabulary,
)

logger = logging.getLogger(__name__)

FEATURE_MODES = ("train", "foldin")


# --- Coherence ---

def top_words(W: np.ndarray, topic_index: int, n: int, vocab: Vocabulary) -> List[str]:
    """
    The n terms with the largest weight in one topic column.

    Ties are broken by ascending term index.
    """
    V = W.shape[0]
    if not 1 <= n <= V:
        raise ValueError(f"n must be in 1..{V}, got {n}")
    column = W[:, topic_index]
    order = np.lexsort((np.arange(V), -column))
    return [vocab.terms[i] for i in order[:n]]


def we_coherence(words: Sequence[str], embeddings: EmbeddingTable) -> float:
    """
    Mean cosine similarity over all pairs of embedded words.

    Words missing from the table are skipped and the pair count shrinks with them.

    Raises:
        TooFewEmbeddedWords: If fewer than two words have embeddings
    """
    found = [w for w in words if w in embeddings]
    if len(found) < 2:
        raise TooFewEmbeddedWords(f"Only {len(found)} of {len(words)} words have embeddings")
    sims = cosine_similarity(np.vstack([embeddings.vectors[w] for w in found]))
    upper = sims[np.triu_indices(len(found), k=1)]
    return float(np.clip(upper.mean(), -1.0, 1.0))


def model_coherence(
    W: np.ndarray,
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    n: int = EVAL_CONFIG["top_n"],
) -> TopicReport:
    """
    Per-topic top words and coherence, averaged over scorable topics.

    Topics with fewer than two embedded top words are reported with coherence
    None and left out of the mean.

    Raises:
        NoScorableTopics: If no topic can be scored
    """
    if W.shape[1] < 1:
        raise ValueError("W has no topics")
    lists, scores = [], []
    for t in range(W.shape[1]):
        words = top_words(W, t, n, vocab)
        lists.append(words)
        try:
            scores.append(we_coherence(words, embeddings))
        except TooFewEmbeddedWords:
            scores.append(None)
    scored = [s for s in scores if s is not None]
    if not scored:
        raise NoScorableTopics(f"None of the {W.shape[1]} topics has two embedded top words")
    if len(scored) < len(scores):
        logger.info("%d of %d topics could not be scored", len(scores) - len(scored), len(scores))
    return TopicReport(top_words=lists, coherence=scores, mean_coherence=float(np.mean(scored)))


def load_embeddings(path: Path) -> EmbeddingTable:
    """
    Parse `word v1 ... vd` lines; d is set by the first well-formed line.

    Words are lowercased, and a repeated word keeps its last vector.
    Malformed lines are skipped and counted.

    Raises:
        EmptyTable: If no line yields a vector
        InconsistentDimension: If skipped lines outnumber accepted ones
    """
    path = Path(path)
    vectors: Dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    accepted = skipped = 0
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2 or (dim is not None and len(parts) != dim + 1):
                skipped += 1
                continue
            try:
                vec = np.asarray([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                skipped += 1
                continue
            if dim is None:
                dim = vec.size
            vectors[parts[0].lower()] = vec
            accepted += 1
    if not vectors:
        raise EmptyTable(f"{path}: no embedding vectors found")
    if skipped > accepted:
        raise InconsistentDimension(
            f"{path}: {skipped} lines do not match dimension {dim} set by the first line ({accepted} do)"
        )
    if skipped:
        logger.warning("Skipped %d malformed embedding lines in %s", skipped, path)
    return EmbeddingTable(dim=dim, vectors=vectors, skipped=skipped)


# --- Classification ---

def macro_f1(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """
    Unweighted mean of per-class F1 over every class seen in labels or predictions.

    A class with undefined precision or recall scores F1 = 0.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0 or predictions.shape != labels.shape:
        raise ValueError(f"need equal nonempty lengths, got {predictions.size} and {labels.size}")
    return float(f1_score(labels, predictions, average="macro", zero_division=0))


class SoftmaxRegression(ClassifierMixin, BaseEstimator):
    """
    Multinomial logistic regression fitted by full-batch gradient descent.

    Weights start at zero, so fitting is deterministic.

    Args:
        epochs: Gradient steps over the full training set
        lr: Step size
    """

    def __init__(self, epochs: int = EVAL_CONFIG["classifier_epochs"], lr: float = EVAL_CONFIG["classifier_lr"]):
        self.epochs = epochs
        self.lr = lr

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        n, d = X.shape
        Y = np.eye(self.classes_.size)[encoded]
        self.coef_ = np.zeros((d, self.classes_.size))
        self.intercept_ = np.zeros(self.classes_.size)
        for _ in range(self.epochs):
            grad = (self._softmax(X) - Y) / n
            self.coef_ -= self.lr * (X.T @ grad)
            self.intercept_ -= self.lr * grad.sum(axis=0)
        return self

    def _softmax(self, X: np.ndarray) -> np.ndarray:
        logits = X @ self.coef_ + self.intercept_
        logits -= logits.max(axis=1, keepdims=True)
        expd = np.exp(logits)
        return expd / expd.sum(axis=1, keepdims=True)

    def predict_proba(self, X):
        check_is_fitted(self, "coef_")
        return self._softmax(np.asarray(X, dtype=np.float64))

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def fit_and_score(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_test: np.ndarray,
    y_test: np.ndarray,
    epochs: int = EVAL_CONFIG["classifier_epochs"],
    lr: float = EVAL_CONFIG["classifier_lr"],
) -> ClassificationReport:
    """
    Fit on L2-normalized training features and score on the test features.

    Raises:
        SingleClass: If the training labels hold fewer than two classes
    """
    y_train = np.asarray(y_train)
    y_test = np.asarray(y_test)
    if np.unique(y_train).size < 2:
        raise SingleClass(f"Training labels hold a single class ({np.unique(y_train).tolist()})")
    clf = SoftmaxRegression(epochs=epochs, lr=lr).fit(normalize(X_train, norm="l2"), y_train)
    predictions = clf.predict(normalize(X_test, norm="l2"))

    classes = np.union1d(np.union1d(y_train, y_test), predictions)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_test, predictions, labels=classes, zero_division=0
    )
    per_class = {
        int(c): {"precision": float(p), "recall": float(r), "f1": float(f), "support": int(s)}
        for c, p, r, f, s in zip(classes, precision, recall, f1, support)
    }
    return ClassificationReport(
        macro_f1=macro_f1(predictions, y_test),
        accuracy=float(accuracy_score(y_test, predictions)),
        per_class=per_class,
        n_train=int(y_train.size),
        n_test=int(y_test.size),
    )


def train_classifier(
    features: np.ndarray,
    labels: Sequence[int],
    split_ratio: float = EVAL_CONFIG["split_ratio"],
    seed: int = 0,
    epochs: int = EVAL_CONFIG["classifier_epochs"],
    lr: float = EVAL_CONFIG["classifier_lr"],
) -> ClassificationReport:
    """
    Split topic-weight vectors, train on one side and report on the other.

    Args:
        features: n x k topic-weight vectors, one document per row
        labels: Class id per row
        split_ratio: Training share
        seed: Split seed
        epochs: Gradient descent steps
        lr: Step size

    Raises:
        SingleClass: If fewer than two classes are present
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise SingleClass(f"Classification needs two classes, labels hold {np.unique(labels).tolist()}")
    X_train, X_test, y_train, y_test = train_test_split(
        features, labels, train_size=split_ratio, random_state=seed, shuffle=True
    )
    return fit_and_score(X_train, y_train, X_test, y_test, epochs=epochs, lr=lr)


def _nonempty_columns(A: CountMatrix) -> np.ndarray:
    return np.flatnonzero(A.data.getnnz(axis=0) > 0)


def document_features(
    clients: Sequence[ClientState],
    W: Optional[np.ndarray] = None,
    matrix: Optional[CountMatrix] = None,
    mode: str = "train",
    foldin_iters: int = EVAL_CONFIG["foldin_iters"],
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Topic-weight features and labels for classification.

    Args:
        clients: Trained clients; in "train" mode their H_i columns are the features
        W: Trained topic model, needed for "foldin"
        matrix: Documents to fold in ("foldin" mode)
        mode: "train" or "foldin"
        foldin_iters: Fold-in iterations

    Returns:
        (features n x k, labels); documents with no in-vocabulary token are left out
    """
    if mode not in FEATURE_MODES:
        raise ValueError(f"mode must be one of {FEATURE_MODES}, got '{mode}'")
    if mode == "train":
        rows, labels = [], []
        for client in clients:
            keep = _nonempty_columns(client.A)
            rows.append(client.H.H[:, keep].T)
            labels.append(client.A.labels[keep])
        return np.vstack(rows), np.concatenate(labels)
    if W is None or matrix is None:
        raise ValueError("foldin mode needs W and a matrix of documents")
    keep = _nonempty_columns(matrix)
    subset = matrix.select(keep)
    return infer_topics_batch(W, subset, iters=foldin_iters).T, subset.labels


def classify_clients(
    clients: Sequence[ClientState],
    seed: int = 0,
    split_ratio: float = EVAL_CONFIG["split_ratio"],
) -> ClassificationReport:
    """Classification report on the clients' training-time topic-weight vectors"""
    features, labels = document_features(clients, mode="train")
    return train_classifier(features, labels, split_ratio=split_ratio, seed=seed)


def write_report(path: Path, report, config_hash: str, **extra) -> Path:
    """Write a TopicReport / ClassificationReport as sorted-key JSON with the producing config hash"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = report.to_dict()
    record["config_hash"] = config_hash
    record.update(extra)
    path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
