"""
Domain Types for Federated NMF Topic Modeling

Defines the data carried between pipeline stages:
1. Corpus types - Document, Vocabulary, CountMatrix
2. Factorization types - TopicModel (W), ClientFactors (H_i), MiCritic (T_theta)
3. Federation types - ClientShard, ClientState, ServerState, RoundMetrics
4. Evaluation types - EmbeddingTable, TopicReport, ClassificationReport
"""

from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class Document:
    """One labeled raw text"""
    id: str
    text: str
    label: int


@dataclass(frozen=True)
class Vocabulary:
    """
    Ordered list of distinct terms.

    `index` is the exact inverse of `terms` and is built on construction.
    """
    terms: Tuple[str, ...]
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        index = {term: i for i, term in enumerate(terms)}
        if len(index) != len(terms):
            raise ValueError("Vocabulary terms must be distinct")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "index", index)

    @property
    def V(self) -> int:
        return len(self.terms)

    def __len__(self) -> int:
        return len(self.terms)


@dataclass
class CountMatrix:
    """
    Sparse token-by-document matrix (V x N, columns are documents).

    Entries are strictly positive; vectorized corpora hold integer counts,
    synthetic factorization targets may hold real values.
    """
    data: sparse.csc_matrix
    doc_ids: Tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self):
        matrix = sparse.csc_matrix(self.data, dtype=np.float64)
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        matrix.sort_indices()
        if matrix.nnz and (not np.all(np.isfinite(matrix.data)) or matrix.data.min() <= 0):
            raise ValueError("CountMatrix entries must be finite and strictly positive")
        self.data = matrix
        self.doc_ids = tuple(self.doc_ids)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.doc_ids) != matrix.shape[1] or len(self.labels) != matrix.shape[1]:
            raise ValueError(
                f"CountMatrix has {matrix.shape[1]} columns but {len(self.doc_ids)} doc ids "
                f"and {len(self.labels)} labels"
            )

    @property
    def V(self) -> int:
        return self.data.shape[0]

    @property
    def N(self) -> int:
        return self.data.shape[1]

    def column(self, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """Return (term indices, counts) of column j"""
        start, end = self.data.indptr[j], self.data.indptr[j + 1]
        return self.data.indices[start:end], self.data.data[start:end]

    def column_entries(self, j: int) -> List[Tuple[int, float]]:
        """Column j as a list of (term-index, count) pairs"""
        indices, values = self.column(j)
        return [(int(i), float(v)) for i, v in zip(indices, values)]

    def dense_columns(self, cols: Sequence[int]) -> np.ndarray:
        """Densify the given columns into a V x len(cols) float array"""
        return self.data[:, np.asarray(cols, dtype=np.int64)].toarray()

    def select(self, cols: Sequence[int]) -> "CountMatrix":
        """Column subset, carrying doc ids and labels along"""
        cols = np.asarray(cols, dtype=np.int64)
        return CountMatrix(
            data=self.data[:, cols],
            doc_ids=tuple(self.doc_ids[c] for c in cols),
            labels=self.labels[cols],
        )

    def total(self) -> float:
        return float(self.data.sum())

    @classmethod
    def from_dense(
        cls,
        array: np.ndarray,
        doc_ids: Optional[Sequence[str]] = None,
        labels: Optional[Sequence[int]] = None,
    ) -> "CountMatrix":
        array = np.asarray(array, dtype=np.float64)
        n = array.shape[1]
        return cls(
            data=sparse.csc_matrix(array),
            doc_ids=tuple(doc_ids) if doc_ids is not None else tuple(f"doc-{j}" for j in range(n)),
            labels=np.zeros(n, dtype=np.int64) if labels is None else np.asarray(labels),
        )


def _as_nonneg_matrix(values: np.ndarray, name: str) -> np.ndarray:
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {matrix.shape}")
    if matrix.size and matrix.min() < 0:
        raise ValueError(f"{name} has negative entries")
    return matrix


@dataclass
class TopicModel:
    """Token-topic matrix W (V x k), the globally shared factor"""
    W: np.ndarray

    def __post_init__(self):
        self.W = _as_nonneg_matrix(self.W, "W")

    @property
    def V(self) -> int:
        return self.W.shape[0]

    @property
    def k(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "TopicModel":
        return TopicModel(self.W.copy())


@dataclass
class ClientFactors:
    """Topic-document matrix H_i (k x N_i); column j belongs to local document j"""
    H: np.ndarray

    def __post_init__(self):
        self.H = _as_nonneg_matrix(self.H, "H")

    @property
    def k(self) -> int:
        return self.H.shape[0]

    @property
    def N(self) -> int:
        return self.H.shape[1]


@dataclass
class MiCritic:
    """
    Scoring network T_theta: concat(a, h) -> Dense -> ReLU -> ... -> Dense(1).

    Parameters are kept as parallel lists of layer weights (fan_in x fan_out)
    and biases; `tau` is the SMILE clip threshold.
    """
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    tau: float = 5.0

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("MiCritic needs one bias per weight matrix")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64).reshape(-1) for b in self.biases]
        for w, b, nxt in zip(self.weights, self.biases, self.weights[1:] + [None]):
            if w.shape[1] != b.shape[0] or (nxt is not None and nxt.shape[0] != w.shape[1]):
                raise ValueError("MiCritic layer shapes do not chain")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("MiCritic output layer must have width 1")
        if not all(np.all(np.isfinite(p)) for p in self.parameters()):
            raise ValueError("MiCritic parameters must be finite")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def hidden(self) -> Tuple[int, ...]:
        return tuple(w.shape[1] for w in self.weights[:-1])

    def parameters(self) -> List[np.ndarray]:
        """Flat parameter list in layer order: W1, b1, W2, b2, ..."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    @property
    def num_params(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def with_parameters(self, params: Sequence[np.ndarray]) -> "MiCritic":
        """New critic with the same tau and the given flat parameter list"""
        params = list(params)
        return MiCritic(weights=params[0::2], biases=params[1::2], tau=self.tau)

    def copy(self) -> "MiCritic":
        return self.with_parameters([p.copy() for p in self.parameters()])


@dataclass(frozen=True)
class ClientShard:
    """Document columns assigned to one client and their realized label histogram"""
    client_id: int
    columns: Tuple[int, ...]
    label_mix: np.ndarray = field(compare=False)

    @property
    def size(self) -> int:
        return len(self.columns)


@dataclass
class ClientState:
    """Client-private data: its count matrix view and persistent H_i"""
    client_id: int
    shard: ClientShard
    A: CountMatrix
    H: ClientFactors

    @property
    def N_i(self) -> int:
        return self.A.N


@dataclass
class ServerState:
    """Master parameters plus adaptive optimizer moments (None until first FedOpt step)"""
    round: int
    model: TopicModel
    critic: MiCritic
    opt_m: Optional[List[np.ndarray]] = None
    opt_v: Optional[List[np.ndarray]] = None
    comm_bytes: int = 0

    def parameters(self) -> List[np.ndarray]:
        """Transmitted parameter tensors: W followed by the critic's"""
        return [self.model.W] + self.critic.parameters()


@dataclass
class RoundMetrics:
    """Per-round training record"""
    round: int
    participants: Tuple[int, ...]
    mean_recon_loss: float
    mean_mi_estimate: Optional[float]
    cumulative_comm_bytes: int
    macro_f1: Optional[float] = None

    def to_record(self) -> dict:
        record = asdict(self)
        record["participants"] = list(self.participants)
        return record


@dataclass
class EmbeddingTable:
    """Word embedding lookup; words are lowercased at load"""
    dim: int
    vectors: Dict[str, np.ndarray]
    skipped: int = 0

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class TopicReport:
    """Top words and WE coherence per topic; None marks an unscorable topic"""
    top_words: List[List[str]]
    coherence: List[Optional[float]]
    mean_coherence: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ClassificationReport:
    """Downstream classification quality of topic-weight features"""
    macro_f1: float
    accuracy: float
    per_class: Dict[int, Dict[str, float]]
    n_train: int
    n_test: int
    classifier: str = "multinomial-logistic-regression"

    def to_dict(self) -> dict:
        record = asdict(self)
        record["per_class"] = {str(c): stats for c, stats in self.per_class.items()}
        return record
