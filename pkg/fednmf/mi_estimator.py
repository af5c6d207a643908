"""
SMILE Mutual-Information Estimator

The critic T_theta scores (count column, topic-weight column) pairs. On a
mini-batch S of size B the clipped lower bound is

    I = mean_j T(a_j, h_j) - log( mean_{j != j'} clip(exp T(a_j, h_j'), e^-tau, e^tau) )

Forward and backward passes are written by hand in numpy. Because the first
layer is linear in concat(a, h), all B*B pair activations are built from two
B-row projections instead of B*B concatenations.
"""

import logging
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from fednmf.config import CRITIC_CONFIG
from fednmf.errors import BatchTooSmall, DimensionMismatch, InvalidBounds
from models import CountMatrix, MiCritic

logger = logging.getLogger(__name__)


class SmileResult(NamedTuple):
    value: float
    grad_theta: List[np.ndarray]
    grad_H: np.ndarray


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def init_critic(
    V: int,
    k: int,
    rng: np.random.Generator,
    hidden: Sequence[int] = CRITIC_CONFIG["hidden"],
    tau: float = CRITIC_CONFIG["tau"],
) -> MiCritic:
    """
    Glorot-uniform critic over inputs of size V + k.

    Each weight matrix is drawn from U[-s, s] with s = sqrt(6 / (fan_in + fan_out));
    biases start at zero.
    """
    if V < 1 or k < 1:
        raise ValueError(f"V and k must be >= 1, got V={V}, k={k}")
    widths = [V + k, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MiCritic(weights=weights, biases=biases, tau=tau)


def critic_forward(critic: MiCritic, a_col: np.ndarray, h_col: np.ndarray) -> float:
    """
    Score one (count column, topic-weight column) pair.

    Raises:
        DimensionMismatch: If len(a_col) + len(h_col) differs from the critic's input size
    """
    x = np.concatenate([np.asarray(a_col, dtype=np.float64).ravel(), np.asarray(h_col, dtype=np.float64).ravel()])
    if x.size != critic.input_dim:
        raise DimensionMismatch(f"Critic expects {critic.input_dim} inputs, got {x.size}")
    last = len(critic.weights) - 1
    for i, (w, b) in enumerate(zip(critic.weights, critic.biases)):
        x = x @ w + b
        if i < last:
            x = relu(x)
    return float(x[0])


def clip(v, lo: float, hi: float):
    """
    Standard clamp min(max(v, lo), hi); arrays are clamped entrywise.

    Raises:
        InvalidBounds: If lo > hi
    """
    if lo > hi:
        raise InvalidBounds(f"clip bounds reversed: lo={lo} > hi={hi}")
    if np.ndim(v) == 0:
        return min(max(float(v), lo), hi)
    return np.clip(v, lo, hi)


def _check_batch(critic: MiCritic, A: CountMatrix, H: np.ndarray, batch: Sequence[int]) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.int64).reshape(-1)
    if batch.size < 2:
        raise BatchTooSmall(f"SMILE needs a batch of at least 2 columns, got {batch.size}")
    if H.shape[1] != A.N:
        raise DimensionMismatch(f"H has {H.shape[1]} columns but A has N={A.N}")
    if critic.input_dim != A.V + H.shape[0]:
        raise DimensionMismatch(f"Critic expects {critic.input_dim} inputs, A and H give {A.V} + {H.shape[0]}")
    return batch


def _pair_forward(critic: MiCritic, Xa: np.ndarray, Xh: np.ndarray):
    """
    Scores of every (a_j, h_j') pair.

    Args:
        Xa: B x V batch count columns, one document per row
        Xh: B x k batch topic-weight columns, one document per row

    Returns:
        (scores, cache) with scores[j, j'] = T(a_j, h_j'); cache keeps the
        pre-activations and activations needed by _pair_backward
    """
    B = Xa.shape[0]
    V = Xa.shape[1]
    w1 = critic.weights[0]
    z = (Xa @ w1[:V])[:, None, :] + (Xh @ w1[V:])[None, :, :] + critic.biases[0]
    z = z.reshape(B * B, -1)
    pre, acts = [z], []
    for w, b in zip(critic.weights[1:], critic.biases[1:]):
        a = relu(pre[-1])
        acts.append(a)
        pre.append(a @ w + b)
    scores = pre[-1][:, 0].reshape(B, B)
    return scores, (pre, acts)


def _pair_backward(critic: MiCritic, Xa: np.ndarray, Xh: np.ndarray, cache, G: np.ndarray):
    """Gradients of sum(G * scores) w.r.t. critic parameters and Xh"""
    pre, acts = cache
    B, V = Xa.shape
    n_layers = len(critic.weights)
    grads_w: List[np.ndarray] = [None] * n_layers
    grads_b: List[np.ndarray] = [None] * n_layers

    dz = G.reshape(B * B, 1)
    for layer in range(n_layers - 1, 0, -1):
        a = acts[layer - 1]
        grads_w[layer] = a.T @ dz
        grads_b[layer] = dz.sum(axis=0)
        da = dz @ critic.weights[layer].T
        dz = da * (pre[layer - 1] > 0)

    dz = dz.reshape(B, B, -1)
    d_row = dz.sum(axis=1)  # flows into Xa @ W1[:V]
    d_col = dz.sum(axis=0)  # flows into Xh @ W1[V:]
    w1 = critic.weights[0]
    grads_w[0] = np.vstack([Xa.T @ d_row, Xh.T @ d_col])
    grads_b[0] = dz.sum(axis=(0, 1))
    d_xh = d_col @ w1[V:].T

    grad_theta = []
    for gw, gb in zip(grads_w, grads_b):
        grad_theta.extend([gw, gb])
    return grad_theta, d_xh


def _smile_from_scores(scores: np.ndarray, tau: float) -> Tuple[float, np.ndarray]:
    """SMILE value and dI/dscores for a B x B pair score matrix"""
    B = scores.shape[0]
    off = ~np.eye(B, dtype=bool)
    clipped = np.exp(clip(scores, -tau, tau))
    marginal = clipped[off].mean()
    value = float(np.trace(scores) / B - np.log(marginal))

    inside = (scores > -tau) & (scores < tau) & off
    G = np.where(inside, -clipped / (marginal * B * (B - 1)), 0.0)
    G[np.diag_indices(B)] = 1.0 / B
    return value, G


def _batch_inputs(A: CountMatrix, H: np.ndarray, batch: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return A.dense_columns(batch).T, H[:, batch].T


def smile_estimate(critic: MiCritic, A: CountMatrix, H: np.ndarray, batch: Sequence[int]) -> float:
    """
    Mini-batch SMILE lower bound over the batch columns of (A, H).

    Raises:
        BatchTooSmall: If the batch has fewer than 2 columns
        DimensionMismatch: If A, H and the critic disagree on sizes
    """
    batch = _check_batch(critic, A, H, batch)
    Xa, Xh = _batch_inputs(A, H, batch)
    scores, _ = _pair_forward(critic, Xa, Xh)
    value, _ = _smile_from_scores(scores, critic.tau)
    return value


def smile_value_and_gradients(
    critic: MiCritic, A: CountMatrix, H: np.ndarray, batch: Sequence[int]
) -> SmileResult:
    """
    SMILE value plus its exact gradients in one forward/backward pass.

    Returns:
        SmileResult(value, grad_theta, grad_H) where grad_theta follows
        critic.parameters() order and grad_H is k x B (batch columns of H)
    """
    batch = _check_batch(critic, A, H, batch)
    Xa, Xh = _batch_inputs(A, H, batch)
    scores, cache = _pair_forward(critic, Xa, Xh)
    value, G = _smile_from_scores(scores, critic.tau)
    grad_theta, d_xh = _pair_backward(critic, Xa, Xh, cache, G)
    return SmileResult(value=value, grad_theta=grad_theta, grad_H=d_xh.T)


def smile_gradients(
    critic: MiCritic, A: CountMatrix, H: np.ndarray, batch: Sequence[int]
) -> Tuple[List[np.ndarray], np.ndarray]:
    """(grad_theta, grad_H_batch) of smile_estimate"""
    result = smile_value_and_gradients(critic, A, H, batch)
    return result.grad_theta, result.grad_H


def critic_ascent_step(
    critic: MiCritic, A: CountMatrix, H: np.ndarray, batch: Sequence[int], eta: float
) -> Tuple[MiCritic, float]:
    """
    One gradient ASCENT step theta <- theta + eta * dI/dtheta, in place. H is untouched.

    Returns:
        (critic, estimate) where estimate is the SMILE value before the step
    """
    value, grad_theta, _ = smile_value_and_gradients(critic, A, H, batch)
    if eta:
        for param, grad in zip(critic.parameters(), grad_theta):
            param += eta * grad
    return critic, value
