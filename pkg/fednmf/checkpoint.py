"""
Checkpoint Files

Plain-text snapshots of trained state, written at the end of training and
every `checkpoint_every` rounds:

- Topic model: header `V k`, then V rows of k values
- Critic: `tau <tau> layers <L>`, then per layer a `rows cols` header, the
  row-major weights and one bias line
- Document topics: header `N k`, then `doc_id<TAB>label<TAB>v1 ... vk` per
  document that has at least one in-vocabulary token
"""

import logging
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from fednmf.errors import MalformedFile
from models import ClientState, MiCritic, TopicModel

logger = logging.getLogger(__name__)

_FMT = "%.17g"


def _row(values: np.ndarray) -> str:
    return " ".join(_FMT % v for v in values)


def save_topic_model(model: TopicModel, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{model.V} {model.k}"] + [_row(r) for r in model.W]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_topic_model(path: Path) -> TopicModel:
    """
    Raises:
        MalformedFile: If the header and the number of rows/values disagree
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    try:
        V, k = (int(x) for x in lines[0].split())
        W = np.asarray([[float(x) for x in line.split()] for line in lines[1:V + 1]], dtype=np.float64)
    except (ValueError, IndexError):
        raise MalformedFile(f"{path}: not a topic model checkpoint")
    if W.shape != (V, k):
        raise MalformedFile(f"{path}: header says {V}x{k} but found {W.shape}")
    return TopicModel(W)


def save_critic(critic: MiCritic, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"tau {_FMT % critic.tau} layers {len(critic.weights)}"]
    for w, b in zip(critic.weights, critic.biases):
        lines.append(f"{w.shape[0]} {w.shape[1]}")
        lines.extend(_row(r) for r in w)
        lines.append(_row(b))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_critic(path: Path) -> MiCritic:
    path = Path(path)
    lines = iter(path.read_text(encoding="utf-8").splitlines())
    try:
        head = next(lines).split()
        if head[0] != "tau" or head[2] != "layers":
            raise ValueError
        tau, n_layers = float(head[1]), int(head[3])
        weights, biases = [], []
        for _ in range(n_layers):
            rows, cols = (int(x) for x in next(lines).split())
            w = np.asarray([[float(x) for x in next(lines).split()] for _ in range(rows)])
            b = np.asarray([float(x) for x in next(lines).split()])
            if w.shape != (rows, cols) or b.shape != (cols,):
                raise ValueError
            weights.append(w)
            biases.append(b)
    except (ValueError, IndexError, StopIteration):
        raise MalformedFile(f"{path}: not a critic checkpoint")
    return MiCritic(weights=weights, biases=biases, tau=tau)


def save_doc_topics(clients: Sequence[ClientState], path: Path) -> Path:
    """
    Write every client's H_i columns with document ids and labels.

    Documents with no in-vocabulary token are left out, matching the feature
    set used for downstream classification.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    k = clients[0].H.k if clients else 0
    rows = []
    for client in clients:
        for j in np.flatnonzero(client.A.data.getnnz(axis=0) > 0):
            rows.append(f"{client.A.doc_ids[j]}\t{client.A.labels[j]}\t{_row(client.H.H[:, j])}")
    path.write_text("\n".join([f"{len(rows)} {k}"] + rows) + "\n", encoding="utf-8")
    return path


def load_doc_topics(path: Path) -> Tuple[List[str], np.ndarray, np.ndarray]:
    """
    Returns:
        (doc_ids, labels, features) with features N x k
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    try:
        n, k = (int(x) for x in lines[0].split())
        doc_ids, labels, rows = [], [], []
        for line in lines[1:n + 1]:
            doc_id, label, values = line.split("\t")
            doc_ids.append(doc_id)
            labels.append(int(label))
            rows.append([float(x) for x in values.split()])
        features = np.asarray(rows, dtype=np.float64).reshape(n, k)
    except ValueError:
        raise MalformedFile(f"{path}: not a document-topics file")
    return doc_ids, np.asarray(labels, dtype=np.int64), features
