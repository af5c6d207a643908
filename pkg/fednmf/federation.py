"""
Federated Training Loop

Simulates the server/client protocol in one process:

1. The server samples m = max(floor(C*K), 1) clients
2. Each participant copies (W, theta), runs E local epochs of projected SGD on
   (W, H_i) followed by a critic ascent step per batch, and returns (W, theta)
3. The server aggregates with FedAvg or a FedOpt rule

H_i never leaves its client. Every random draw comes from a stream derived from
(master_seed, purpose, client_id, round), so results do not depend on how many
threads run client updates.
"""

import logging
import math
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from fednmf.aggregation import aggregate_fedavg, aggregate_fedopt
from fednmf.config import BYTES_PER_FLOAT, Aggregator, FedRunConfig, SgdConfig
from fednmf.errors import BatchTooSmall, EmptyUpdateSet
from fednmf.factorization import (
    default_init_scale,
    init_client_factors,
    init_topic_model,
    reconstruction_loss,
    sgd_step,
)
from fednmf.mi_estimator import critic_ascent_step, init_critic
from fednmf.seeding import derive_rng
from models import ClientShard, ClientState, CountMatrix, MiCritic, RoundMetrics, ServerState, TopicModel

logger = logging.getLogger(__name__)

# Stream purposes
INIT_MODEL = "init-model"
INIT_CRITIC = "init-critic"
INIT_CLIENT = "init-client"
SELECT_CLIENTS = "select-clients"
CLIENT_UPDATE = "client-update"


class ClientUpdate(NamedTuple):
    """What a participant sends back, plus its local training statistics"""
    model: TopicModel
    critic: MiCritic
    recon_loss: float
    mi_estimate: Optional[float]


class TrainingResult(NamedTuple):
    model: TopicModel
    client_factors: list
    history: List[RoundMetrics]
    critic: MiCritic
    clients: List[ClientState]


RoundEvaluator = Callable[[ServerState, List[ClientState]], float]
RoundCallback = Callable[[RoundMetrics, ServerState, List[ClientState]], None]


def select_clients(K: int, C: float, rng: np.random.Generator) -> Tuple[int, ...]:
    """
    Sample m = max(floor(C*K), 1) distinct client ids uniformly.

    Returns:
        Selected ids in ascending order
    """
    if K < 1 or not 0 < C <= 1:
        raise ValueError(f"need K >= 1 and 0 < C <= 1, got K={K}, C={C}")
    m = max(math.floor(C * K + 1e-9), 1)
    return tuple(sorted(int(i) for i in rng.choice(K, size=m, replace=False)))


def round_comm_bytes(num_participants: int, model: TopicModel, critic: MiCritic) -> int:
    """Download plus upload of W and theta for every participant"""
    return 2 * num_participants * (model.W.size + critic.num_params) * BYTES_PER_FLOAT


def make_batches(n: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """
    Shuffle 0..n-1 and cut it into batches of batch_size.

    A trailing batch of a single column is merged into the previous one.
    """
    perm = rng.permutation(n)
    batches = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and batches[-1].size == 1:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def client_update(
    client: ClientState,
    model_in: TopicModel,
    critic_in: MiCritic,
    sgd: SgdConfig,
    rng: np.random.Generator,
) -> ClientUpdate:
    """
    Local training on one client.

    W and the critic are copied; H_i is updated in place and stays on the client.
    Per batch: projected SGD on (W, H_i), then one critic ascent step evaluated at
    the post-update H_i.

    Returns:
        ClientUpdate with the local W and critic, and the last epoch's mean batch
        reconstruction loss and mean batch SMILE estimate (None if no batch had
        two columns)

    Raises:
        BatchTooSmall: If lambda > 0 and the client holds a single document
    """
    W = model_in.W.copy()
    critic = critic_in.copy()
    H = client.H.H
    A = client.A
    if sgd.lam > 0 and client.N_i < 2:
        raise BatchTooSmall(f"Client {client.client_id} holds {client.N_i} document; lambda > 0 needs 2")

    losses, estimates = [], []
    for epoch in range(sgd.epochs):
        last_epoch = epoch == sgd.epochs - 1
        for batch in make_batches(client.N_i, sgd.batch_size, rng):
            if last_epoch:
                losses.append(reconstruction_loss(W, H, A, batch))
            sgd_step(W, H, A, batch, sgd, critic)
            if batch.size >= 2:
                critic, estimate = critic_ascent_step(critic, A, H, batch, sgd.eta)
                if last_epoch:
                    estimates.append(estimate)

    return ClientUpdate(
        model=TopicModel(W),
        critic=critic,
        recon_loss=float(np.mean(losses)),
        mi_estimate=float(np.mean(estimates)) if estimates else None,
    )


def mean_client_loss(model: TopicModel, clients: Sequence[ClientState]) -> float:
    """Mean over clients of the reconstruction loss on all their local documents"""
    return float(np.mean([
        reconstruction_loss(model.W, c.H.H, c.A, np.arange(c.N_i)) for c in clients
    ]))


def run_round(
    server: ServerState,
    clients: List[ClientState],
    config: FedRunConfig,
    rng: Optional[np.random.Generator] = None,
    threads: int = 1,
) -> Tuple[ServerState, RoundMetrics]:
    """
    One communication round.

    Args:
        server: Master state after round t-1
        clients: Every client, indexed by client id
        config: Run hyperparameters
        rng: Client-selection stream; derived from (master_seed, round) when omitted
        threads: Parallel workers for client updates

    Returns:
        (server state after round t, metrics of round t)
    """
    if not clients:
        raise EmptyUpdateSet("run_round needs at least one client")
    t = server.round + 1
    seed = config.master_seed
    if rng is None:
        rng = derive_rng(seed, SELECT_CLIENTS, t)
    participants = select_clients(len(clients), config.participation, rng)

    updates = Parallel(n_jobs=threads, prefer="threads")(
        delayed(client_update)(
            clients[i], server.model, server.critic, config.sgd, derive_rng(seed, CLIENT_UPDATE, i, t)
        )
        for i in participants
    )
    weights = [clients[i].N_i for i in participants]

    if config.aggregator is Aggregator.FEDAVG:
        model, critic = aggregate_fedavg(updates, weights)
        new_server = ServerState(
            round=t, model=model, critic=critic,
            opt_m=server.opt_m, opt_v=server.opt_v, comm_bytes=server.comm_bytes,
        )
    else:
        new_server = aggregate_fedopt(
            server, updates, weights, config.aggregator,
            server_lr=config.server_lr, beta1=config.beta1,
            beta2=config.beta2, adapt_eps=config.adapt_eps,
        )
        new_server.round = t
    new_server.comm_bytes += round_comm_bytes(len(participants), server.model, server.critic)

    estimates = [u.mi_estimate for u in updates if u.mi_estimate is not None]
    metrics = RoundMetrics(
        round=t,
        participants=participants,
        mean_recon_loss=mean_client_loss(new_server.model, clients),
        mean_mi_estimate=float(np.mean(estimates)) if estimates else None,
        cumulative_comm_bytes=new_server.comm_bytes,
    )
    logger.info(
        "Round %d: clients=%s loss=%.6g mi=%s bytes=%d",
        t, list(participants), metrics.mean_recon_loss,
        "n/a" if metrics.mean_mi_estimate is None else f"{metrics.mean_mi_estimate:.4f}",
        metrics.cumulative_comm_bytes,
    )
    return new_server, metrics


def init_run(
    matrix: CountMatrix,
    shards: Sequence[ClientShard],
    config: FedRunConfig,
) -> Tuple[ServerState, List[ClientState]]:
    """
    Fresh master state and client states.

    W, the critic and every H_i are drawn from their own derived streams with the
    shared scale sqrt(mean(A) / k).
    """
    seed = config.master_seed
    k = config.num_topics
    scale = default_init_scale(matrix, k)
    model = init_topic_model(matrix.V, k, scale, derive_rng(seed, INIT_MODEL))
    critic = init_critic(matrix.V, k, derive_rng(seed, INIT_CRITIC), hidden=config.critic_hidden, tau=config.tau)
    clients = []
    for shard in shards:
        A_i = matrix.select(shard.columns)
        H_i = init_client_factors(k, A_i.N, scale, derive_rng(seed, INIT_CLIENT, shard.client_id))
        clients.append(ClientState(client_id=shard.client_id, shard=shard, A=A_i, H=H_i))
    return ServerState(round=0, model=model, critic=critic), clients


def run_training(
    matrix: CountMatrix,
    shards: Sequence[ClientShard],
    config: FedRunConfig,
    threads: int = 1,
    on_round: Optional[RoundCallback] = None,
    evaluate: Optional[RoundEvaluator] = None,
    eval_every: int = 0,
) -> TrainingResult:
    """
    T rounds from a fresh initialization.

    Args:
        matrix: Full corpus count matrix
        shards: Client shards, client ids 0..K-1 in order
        config: Run hyperparameters
        threads: Parallel workers for client updates
        on_round: Called with (metrics, server, clients) after round 0 and every round
        evaluate: Optional downstream scorer stored as RoundMetrics.macro_f1
        eval_every: Run `evaluate` every this many rounds (and after the last); 0 disables it

    Returns:
        TrainingResult(model, client_factors, history, critic, clients)
    """
    if len(shards) != config.num_clients:
        logger.warning("Config names K=%d clients but %d shards were given", config.num_clients, len(shards))
    server, clients = init_run(matrix, shards, config)

    metrics = RoundMetrics(
        round=0,
        participants=(),
        mean_recon_loss=mean_client_loss(server.model, clients),
        mean_mi_estimate=None,
        cumulative_comm_bytes=0,
    )
    history = [metrics]
    if on_round is not None:
        on_round(metrics, server, clients)

    for t in range(1, config.rounds + 1):
        server, metrics = run_round(server, clients, config, threads=threads)
        if evaluate is not None and eval_every and (t % eval_every == 0 or t == config.rounds):
            metrics.macro_f1 = evaluate(server, clients)
        history.append(metrics)
        if on_round is not None:
            on_round(metrics, server, clients)

    return TrainingResult(
        model=server.model,
        client_factors=[c.H for c in clients],
        history=history,
        critic=server.critic,
        clients=clients,
    )


def centralized_config(config: FedRunConfig) -> FedRunConfig:
    """The same run with one client, full participation and FedAvg"""
    return config.model_copy(update={
        "num_clients": 1,
        "participation": 1.0,
        "aggregator": Aggregator.FEDAVG,
    })


def run_centralized(
    matrix: CountMatrix,
    config: FedRunConfig,
    on_round: Optional[RoundCallback] = None,
    evaluate: Optional[RoundEvaluator] = None,
    eval_every: int = 0,
) -> TrainingResult:
    """
    Centralized NMF+SGD (lambda=0) or NMF+SGD+MI baseline.

    Runs the federated loop with K=1, C=1 and FedAvg over every document, which
    reproduces a plain centralized SGD trajectory exactly.
    """
    labels = matrix.labels
    shard = ClientShard(
        client_id=0,
        columns=tuple(range(matrix.N)),
        label_mix=np.bincount(labels, minlength=int(labels.max()) + 1 if matrix.N else 0),
    )
    return run_training(
        matrix, [shard], centralized_config(config),
        on_round=on_round, evaluate=evaluate, eval_every=eval_every,
    )
