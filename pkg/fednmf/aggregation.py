"""
Server Aggregation Rules

FedAvg (sample-size weighted mean over participants) and the FedOpt family,
which treats the weighted mean minus the master as a pseudo-gradient:

    m = beta1 * m + (1 - beta1) * delta
    v = v + delta^2                                   FedAdagrad
    v = beta2 * v + (1 - beta2) * delta^2             FedAdam
    v = v - (1 - beta2) * delta^2 * sign(v - delta^2) FedYogi
    x = x + server_lr * m / (sqrt(v) + adapt_eps)

W and the critic parameters are aggregated by the same rule with separate
moment slots. W is projected nonnegative after every aggregation.
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from fednmf.config import FEDOPT_DEFAULTS, Aggregator
from fednmf.errors import DimensionMismatch, EmptyUpdateSet
from fednmf.factorization import project_nonneg
from models import MiCritic, ServerState, TopicModel

logger = logging.getLogger(__name__)


def _flatten(update) -> List[np.ndarray]:
    model, critic = update[0], update[1]
    return [model.W] + critic.parameters()


def _unflatten(params: List[np.ndarray], tau: float) -> Tuple[TopicModel, MiCritic]:
    W = project_nonneg(params[0])
    critic = MiCritic(weights=params[1::2], biases=params[2::2], tau=tau)
    return TopicModel(W), critic


def weighted_mean(tensor_sets: Sequence[Sequence[np.ndarray]], weights: Sequence[float]) -> List[np.ndarray]:
    """
    Parameterwise weighted mean, computed as x_0 + sum_i w_i / sum(w) * (x_i - x_0).

    Identical inputs come back bit-for-bit, and a single input is returned exactly.

    Raises:
        EmptyUpdateSet: If there is nothing to average
        DimensionMismatch: If the updates disagree on parameter shapes
    """
    if not tensor_sets:
        raise EmptyUpdateSet("No client updates to aggregate")
    w = np.asarray(weights, dtype=np.float64)
    if w.size != len(tensor_sets):
        raise ValueError(f"{len(tensor_sets)} updates but {w.size} weights")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError(f"aggregation weights must be nonnegative with a positive sum, got {w.tolist()}")
    shares = w / w.sum()

    base = tensor_sets[0]
    for other in tensor_sets[1:]:
        if len(other) != len(base) or any(a.shape != b.shape for a, b in zip(base, other)):
            raise DimensionMismatch("Client updates have inconsistent parameter shapes")

    means = []
    for p, x0 in enumerate(base):
        delta = np.zeros_like(x0)
        for share, params in zip(shares, tensor_sets):
            delta += share * (params[p] - x0)
        means.append(x0 + delta)
    return means


def aggregate_fedavg(updates: Sequence, weights: Sequence[float]) -> Tuple[TopicModel, MiCritic]:
    """
    FedAvg over participants.

    Args:
        updates: (TopicModel, MiCritic, ...) tuples returned by client_update
        weights: Per-update weights, normally the clients' document counts N_i

    Returns:
        (TopicModel, MiCritic) aggregate, W projected nonnegative
    """
    if not updates:
        raise EmptyUpdateSet("No client updates to aggregate")
    means = weighted_mean([_flatten(u) for u in updates], weights)
    return _unflatten(means, updates[0][1].tau)


def aggregate_fedopt(
    server: ServerState,
    updates: Sequence,
    weights: Sequence[float],
    variant: Aggregator,
    server_lr: float = FEDOPT_DEFAULTS["server_lr"],
    beta1: float = FEDOPT_DEFAULTS["beta1"],
    beta2: float = FEDOPT_DEFAULTS["beta2"],
    adapt_eps: float = FEDOPT_DEFAULTS["adapt_eps"],
) -> ServerState:
    """
    One adaptive server step (FedAdagrad, FedAdam or FedYogi).

    Returns:
        New ServerState with updated master parameters and moments; round and
        communication counters are carried over unchanged

    Raises:
        EmptyUpdateSet: If there is nothing to aggregate
        ValueError: If variant is FedAvg
    """
    variant = Aggregator(variant)
    if variant is Aggregator.FEDAVG:
        raise ValueError("aggregate_fedopt handles adaptive variants only; use aggregate_fedavg")
    if not updates:
        raise EmptyUpdateSet("No client updates to aggregate")

    master = server.parameters()
    means = weighted_mean([_flatten(u) for u in updates], weights)
    if len(means) != len(master) or any(a.shape != b.shape for a, b in zip(means, master)):
        raise DimensionMismatch("Client updates do not match the master parameter shapes")

    opt_m = server.opt_m if server.opt_m is not None else [np.zeros_like(x) for x in master]
    opt_v = server.opt_v if server.opt_v is not None else [np.zeros_like(x) for x in master]

    new_params, new_m, new_v = [], [], []
    for x, mean, m, v in zip(master, means, opt_m, opt_v):
        delta = mean - x
        delta_sq = delta * delta
        m = beta1 * m + (1.0 - beta1) * delta
        if variant is Aggregator.FEDADAGRAD:
            v = v + delta_sq
        elif variant is Aggregator.FEDADAM:
            v = beta2 * v + (1.0 - beta2) * delta_sq
        else:
            v = v - (1.0 - beta2) * delta_sq * np.sign(v - delta_sq)
        new_params.append(x + server_lr * m / (np.sqrt(v) + adapt_eps))
        new_m.append(m)
        new_v.append(v)

    model, critic = _unflatten(new_params, server.critic.tau)
    logger.debug("%s step: max |delta W| = %.3g", variant.value, float(np.abs(means[0] - master[0]).max()))
    return ServerState(
        round=server.round,
        model=model,
        critic=critic,
        opt_m=new_m,
        opt_v=new_v,
        comm_bytes=server.comm_bytes,
    )
