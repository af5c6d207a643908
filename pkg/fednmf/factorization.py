"""
NMF Core

Factor initialization, the mini-batch loss

    L = (1/B) * sum_j ||A(:,j) - W H(:,j)||^2 - lambda * I_SMILE

its gradients, projected SGD steps and fold-in inference for unseen documents.
W and H are plain float64 arrays; steps mutate them in place.
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from fednmf.config import SgdConfig
from fednmf.errors import BatchTooSmall, DimensionMismatch
from fednmf.mi_estimator import smile_estimate, smile_value_and_gradients
from models import ClientFactors, CountMatrix, MiCritic, TopicModel

logger = logging.getLogger(__name__)

# Columns densified at once when a loss spans a whole client
_LOSS_CHUNK = 512


def default_init_scale(A: CountMatrix, k: int) -> float:
    """sqrt(mean(A) / k), so the initial W H is on the scale of A; 1.0 for an all-zero A"""
    mean = A.total() / (A.V * A.N) if A.V and A.N else 0.0
    return float(np.sqrt(mean / k)) if mean > 0 else 1.0


def init_topic_model(V: int, k: int, scale: float, rng: np.random.Generator) -> TopicModel:
    _check_init(V, k, 1, scale)
    return TopicModel(rng.uniform(0.0, scale, size=(V, k)))


def init_client_factors(k: int, N_i: int, scale: float, rng: np.random.Generator) -> ClientFactors:
    _check_init(1, k, N_i, scale)
    return ClientFactors(rng.uniform(0.0, scale, size=(k, N_i)))


def init_factors(
    V: int, k: int, N_i: int, scale: float, rng: np.random.Generator
) -> Tuple[TopicModel, ClientFactors]:
    """
    Draw W (V x k) then H (k x N_i), entries i.i.d. U[0, scale).

    Args:
        V: Vocabulary size
        k: Topic count
        N_i: Document count
        scale: Upper bound of the uniform range
        rng: Source of randomness; W is drawn before H

    Returns:
        (TopicModel, ClientFactors)
    """
    return init_topic_model(V, k, scale, rng), init_client_factors(k, N_i, scale, rng)


def _check_init(V: int, k: int, N_i: int, scale: float) -> None:
    if min(V, k, N_i) < 1:
        raise ValueError(f"V, k and N_i must be >= 1, got V={V}, k={k}, N_i={N_i}")
    if not scale > 0:
        raise ValueError(f"init scale must be positive, got {scale}")


def _check_dims(W: np.ndarray, H: np.ndarray, A: CountMatrix, batch: Sequence[int]) -> np.ndarray:
    if W.shape[0] != A.V:
        raise DimensionMismatch(f"W has {W.shape[0]} rows but A has V={A.V}")
    if W.shape[1] != H.shape[0]:
        raise DimensionMismatch(f"W has k={W.shape[1]} columns but H has {H.shape[0]} rows")
    if H.shape[1] != A.N:
        raise DimensionMismatch(f"H has {H.shape[1]} columns but A has N={A.N}")
    batch = np.asarray(batch, dtype=np.int64).reshape(-1)
    if batch.size == 0:
        raise ValueError("batch must contain at least one column")
    if batch.min() < 0 or batch.max() >= A.N:
        raise DimensionMismatch(f"batch column outside 0..{A.N - 1}")
    return batch


def reconstruction_loss(W: np.ndarray, H: np.ndarray, A: CountMatrix, batch: Sequence[int]) -> float:
    """
    Mean squared Euclidean residual over the batch columns.

    Raises:
        DimensionMismatch: If W, H and A disagree on sizes
    """
    batch = _check_dims(W, H, A, batch)
    total = 0.0
    for start in range(0, batch.size, _LOSS_CHUNK):
        cols = batch[start:start + _LOSS_CHUNK]
        residual = A.dense_columns(cols) - W @ H[:, cols]
        total += float(np.sum(residual * residual))
    return total / batch.size


def total_loss(
    W: np.ndarray,
    H: np.ndarray,
    A: CountMatrix,
    batch: Sequence[int],
    lam: float,
    critic: Optional[MiCritic] = None,
) -> float:
    """Reconstruction loss minus lambda times the SMILE estimate (MI term skipped for lambda=0)"""
    loss = reconstruction_loss(W, H, A, batch)
    if lam > 0:
        loss -= lam * smile_estimate(critic, A, H, batch)
    return loss


def loss_gradients(
    W: np.ndarray,
    H: np.ndarray,
    A: CountMatrix,
    batch: Sequence[int],
    lam: float,
    critic: Optional[MiCritic] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradients of total_loss w.r.t. W and the batch columns of H.

    The MI term reaches H only; W is not a critic input.

    Returns:
        (grad_W, grad_H) with grad_W V x k and grad_H k x B

    Raises:
        BatchTooSmall: If lambda > 0 and the batch has fewer than 2 columns
        DimensionMismatch: If W, H and A disagree on sizes
    """
    batch = _check_dims(W, H, A, batch)
    B = batch.size
    if lam > 0:
        if B < 2:
            raise BatchTooSmall(f"lambda={lam} needs batches of at least 2 columns, got {B}")
        if critic is None:
            raise ValueError("lambda > 0 requires a critic")

    Hb = H[:, batch]
    residual = A.dense_columns(batch) - W @ Hb
    grad_W = (-2.0 / B) * (residual @ Hb.T)
    grad_H = (-2.0 / B) * (W.T @ residual)
    if lam > 0:
        grad_H -= lam * smile_value_and_gradients(critic, A, H, batch).grad_H
    return grad_W, grad_H


def project_nonneg(matrix: np.ndarray, out: Optional[np.ndarray] = None) -> np.ndarray:
    """Entrywise max(x, 0)"""
    return np.maximum(matrix, 0.0, out=out)


def sgd_step(
    W: np.ndarray,
    H: np.ndarray,
    A: CountMatrix,
    batch: Sequence[int],
    config: SgdConfig,
    critic: Optional[MiCritic] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    One projected SGD step on (W, H[:, batch]), both gradients taken at the pre-step point.

    W and H are updated in place and returned.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1)
    grad_W, grad_H = loss_gradients(W, H, A, batch, config.lam, critic)
    W -= config.eta * grad_W
    project_nonneg(W, out=W)
    H[:, batch] = project_nonneg(H[:, batch] - config.eta * grad_H)
    return W, H


def _foldin_step(W: np.ndarray, eta: Optional[float]) -> Tuple[np.ndarray, float]:
    gram = W.T @ W
    if eta is None:
        lipschitz = 2.0 * np.linalg.norm(gram, 2)
        eta = 1.0 / lipschitz if lipschitz > 0 else 0.0
    return gram, eta


def infer_topics(
    W: np.ndarray,
    a_col: Union[np.ndarray, sparse.spmatrix],
    iters: int = 200,
    eta: Optional[float] = None,
) -> np.ndarray:
    """
    Fold-in: topic weights of an unseen document with W frozen.

    Projected gradient descent on ||a - W h||^2 from the uniform vector h = 1/k.

    Args:
        W: Trained token-topic matrix
        a_col: Count column (dense V-vector or sparse V x 1)
        iters: Descent iterations, >= 1
        eta: Step size; defaults to 1 / (2 ||W^T W||_2), which guarantees descent

    Returns:
        Nonnegative topic-weight vector of length k
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    a = np.asarray(a_col.todense() if sparse.issparse(a_col) else a_col, dtype=np.float64).ravel()
    if a.size != W.shape[0]:
        raise DimensionMismatch(f"count column has {a.size} entries but W has V={W.shape[0]}")
    k = W.shape[1]
    gram, step = _foldin_step(W, eta)
    target = W.T @ a
    h = np.full(k, 1.0 / k)
    for _ in range(iters):
        h = project_nonneg(h - step * 2.0 * (gram @ h - target))
    return h


def infer_topics_batch(
    W: np.ndarray,
    A: CountMatrix,
    iters: int = 200,
    eta: Optional[float] = None,
) -> np.ndarray:
    """Fold-in for every column of A at once; returns a k x N matrix"""
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    if A.V != W.shape[0]:
        raise DimensionMismatch(f"A has V={A.V} but W has {W.shape[0]} rows")
    k = W.shape[1]
    gram, step = _foldin_step(W, eta)
    target = np.asarray((A.data.T @ W).T)
    H = np.full((k, A.N), 1.0 / k)
    for _ in range(iters):
        H = project_nonneg(H - step * 2.0 * (gram @ H - target))
    logger.debug("Folded in %d documents over %d iterations", A.N, iters)
    return H
