"""
Client Partition Module

Synthesizes heterogeneous client datasets from one corpus: each client draws
a label distribution q ~ Dir(alpha * p) and receives floor(N/K) documents
drawn without replacement from per-label pools.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from fednmf.config import PartitionSpec
from fednmf.errors import InvalidConcentration, InvalidLabelDistribution, MalformedFile, TooFewDocuments
from fednmf.seeding import derive_rng
from models import ClientShard, CountMatrix

logger = logging.getLogger(__name__)


def sample_dirichlet(concentration: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """
    Draw one point of the simplex from Dir(concentration).

    Gamma variates are drawn with the shape boost Gamma(a) = Gamma(a+1) * U^(1/a)
    and normalized in log space, so tiny concentrations do not underflow to an
    all-zero draw.

    Raises:
        InvalidConcentration: If any entry is not a positive finite number
    """
    alpha = np.asarray(concentration, dtype=np.float64).reshape(-1)
    if alpha.size == 0 or not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
        raise InvalidConcentration(f"Dirichlet concentration must be positive, got {alpha.tolist()}")
    if alpha.size == 1:
        return np.ones(1)
    log_gamma = np.log(rng.standard_gamma(alpha + 1.0)) + np.log(rng.random(alpha.size)) / alpha
    weights = np.exp(log_gamma - log_gamma.max())
    return weights / weights.sum()


def label_histogram(labels: np.ndarray, num_labels: int) -> np.ndarray:
    return np.bincount(np.asarray(labels, dtype=np.int64), minlength=num_labels)


def global_label_distribution(matrix: CountMatrix, num_labels: Optional[int] = None) -> np.ndarray:
    """Empirical label distribution p of a corpus"""
    if num_labels is None:
        num_labels = int(matrix.labels.max()) + 1 if matrix.N else 0
    counts = label_histogram(matrix.labels, num_labels).astype(np.float64)
    return counts / counts.sum()


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    """TV distance between two histograms, each normalized first"""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(0.5 * np.abs(p / p.sum() - q / q.sum()).sum())


def _largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    raw = total * weights
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _label_weights(q: np.ndarray, global_p: np.ndarray, available: np.ndarray) -> np.ndarray:
    # q renormalized over labels whose pools are nonempty; global_p, then uniform, as fallbacks
    for source in (q, global_p):
        w = source[available]
        if w.sum() > 0:
            return w / w.sum()
    return np.full(available.size, 1.0 / available.size)


def partition_clients(
    matrix: CountMatrix,
    spec: PartitionSpec,
    global_p: Optional[Sequence[float]] = None,
) -> List[ClientShard]:
    """
    Split a corpus into K equal-size label-skewed client shards.

    Args:
        matrix: Corpus count matrix (labels are used, counts are not)
        spec: Client count, Dirichlet concentration, seed and allocation mode
        global_p: Label distribution p; defaults to the corpus' empirical one

    Returns:
        K pairwise-disjoint shards of floor(N/K) columns each

    Raises:
        TooFewDocuments: If N < K
        InvalidLabelDistribution: If global_p is not on the simplex or misses labels
    """
    K = spec.num_clients
    if matrix.N < K:
        raise TooFewDocuments(f"Cannot give {K} clients a document each from N={matrix.N}")
    if global_p is None:
        global_p = global_label_distribution(matrix)
    p = np.asarray(global_p, dtype=np.float64)
    num_labels = p.size
    if (
        p.ndim != 1
        or num_labels == 0
        or np.any(p < 0)
        or abs(p.sum() - 1.0) > 1e-9
        or int(matrix.labels.max()) >= num_labels
    ):
        raise InvalidLabelDistribution(f"global_p must be a distribution over all corpus labels, got {p.tolist()}")

    rng = derive_rng(spec.seed, "partition")
    pools = [
        list(rng.permutation(np.flatnonzero(matrix.labels == label)))
        for label in range(num_labels)
    ]
    support = np.flatnonzero(p > 0)
    n = matrix.N // K

    shards = []
    for client_id in range(K):
        q = np.zeros(num_labels)
        q[support] = sample_dirichlet(spec.alpha * p[support], rng)

        taken: List[int] = []
        if spec.allocation == "quota":
            remaining = n
            while remaining > 0:
                available = np.asarray([l for l in range(num_labels) if pools[l]])
                counts = _largest_remainder(remaining, _label_weights(q, p, available))
                for label, want in zip(available, counts):
                    got = min(int(want), len(pools[label]))
                    taken.extend(pools[label].pop() for _ in range(got))
                    remaining -= got
        else:
            for _ in range(n):
                available = np.asarray([l for l in range(num_labels) if pools[l]])
                label = rng.choice(available, p=_label_weights(q, p, available))
                taken.append(pools[label].pop())

        columns = tuple(sorted(int(c) for c in taken))
        shards.append(
            ClientShard(
                client_id=client_id,
                columns=columns,
                label_mix=label_histogram(matrix.labels[list(columns)], num_labels),
            )
        )

    leftover = matrix.N - n * K
    if leftover:
        logger.info("Discarded %d leftover documents (N=%d, K=%d)", leftover, matrix.N, K)
    return shards


def write_shard_manifest(shards: Sequence[ClientShard], path: Path) -> Path:
    """One line per client: `client_id: col,col,...`"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{s.client_id}: {','.join(str(c) for c in s.columns)}" for s in shards]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_shard_manifest(path: Path, matrix: CountMatrix) -> List[ClientShard]:
    """
    Parse a shard manifest and recompute each shard's label histogram.

    Raises:
        MalformedFile: On syntax errors, out-of-range columns or overlapping shards
    """
    path = Path(path)
    num_labels = int(matrix.labels.max()) + 1 if matrix.N else 0
    shards, seen = [], set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                head, body = line.split(":", 1)
                client_id = int(head)
                columns = tuple(sorted(int(c) for c in body.split(",") if c.strip()))
            except ValueError:
                raise MalformedFile(f"{path}:{lineno}: expected 'client_id: col,col,...'")
            if any(not 0 <= c < matrix.N for c in columns):
                raise MalformedFile(f"{path}:{lineno}: column index outside 0..{matrix.N - 1}")
            if seen.intersection(columns):
                raise MalformedFile(f"{path}:{lineno}: client {client_id} shares columns with another client")
            seen.update(columns)
            shards.append(
                ClientShard(
                    client_id=client_id,
                    columns=columns,
                    label_mix=label_histogram(matrix.labels[list(columns)], num_labels),
                )
            )
    if [s.client_id for s in shards] != list(range(len(shards))):
        raise MalformedFile(f"{path}: client ids must be 0..K-1 in order")
    return shards
