"""
Tests for server aggregation: FedAvg and the FedAdagrad / FedAdam / FedYogi
server optimizers.
"""

import numpy as np
import pytest

from fednmf.aggregation import aggregate_fedavg, aggregate_fedopt, weighted_mean
from fednmf.config import Aggregator
from fednmf.errors import DimensionMismatch, EmptyUpdateSet
from fednmf.mi_estimator import init_critic
from models import MiCritic, ServerState, TopicModel

ADAPTIVE = [Aggregator.FEDADAGRAD, Aggregator.FEDADAM, Aggregator.FEDYOGI]


def _scalar_critic(value):
    return MiCritic(weights=[np.array([[value]])], biases=[np.array([0.0])])


def _update(W, critic):
    return (TopicModel(np.asarray(W, dtype=float)), critic)


def test_weighted_mean_hand_case():
    """[2] weight 1 and [4] weight 3 average to [3.5]"""
    (mean,) = weighted_mean([[np.array([2.0])], [np.array([4.0])]], [1, 3])
    assert mean.tolist() == [3.5]


def test_weighted_mean_single_update_is_exact():
    """A lone update comes back bit-for-bit whatever its weight"""
    x = np.random.default_rng(0).random((3, 4))
    (mean,) = weighted_mean([[x]], [17])
    assert np.array_equal(mean, x)


def test_weighted_mean_identical_updates_fixpoint():
    """Averaging copies of the same tensors returns them bit-for-bit"""
    rng = np.random.default_rng(1)
    x = [rng.random((5, 2)), rng.normal(size=7)]
    means = weighted_mean([x, [t.copy() for t in x], [t.copy() for t in x]], [3, 11, 5])
    assert all(np.array_equal(m, t) for m, t in zip(means, x))


def test_weighted_mean_errors():
    """Empty sets, shape disagreements and zero total weight are rejected"""
    with pytest.raises(EmptyUpdateSet):
        weighted_mean([], [])
    with pytest.raises(DimensionMismatch):
        weighted_mean([[np.ones(2)], [np.ones(3)]], [1, 1])
    with pytest.raises(ValueError):
        weighted_mean([[np.ones(2)]], [0])


def test_fedavg_two_clients():
    """Hand-computed 1/4, 3/4 mean over W and the critic"""
    updates = [_update([[2.0]], _scalar_critic(0.0)), _update([[4.0]], _scalar_critic(4.0))]
    model, critic = aggregate_fedavg(updates, [1, 3])
    assert model.W.tolist() == [[3.5]]
    assert critic.weights[0].tolist() == [[3.0]]


def test_fedavg_of_identical_updates_is_identity():
    """Identical updates average to themselves for both W and the critic"""
    rng = np.random.default_rng(2)
    W = rng.random((4, 3))
    critic = init_critic(4, 3, rng, hidden=(5,))
    model, agg = aggregate_fedavg([_update(W, critic), _update(W.copy(), critic.copy())], [10, 30])
    assert np.array_equal(model.W, W)
    assert all(np.array_equal(p, q) for p, q in zip(agg.parameters(), critic.parameters()))


def test_fedavg_empty():
    """FedAvg needs at least one update"""
    with pytest.raises(EmptyUpdateSet):
        aggregate_fedavg([], [])


def _server(W, critic):
    return ServerState(round=3, model=TopicModel(np.asarray(W, dtype=float)), critic=critic, comm_bytes=99)


def test_fedadagrad_scalar_case():
    """x=0, delta=1, lr=1, beta1=0.9, eps=1e-3 -> m=0.1, v=1, x=0.1/1.001"""
    server = _server([[0.0]], _scalar_critic(0.0))
    new = aggregate_fedopt(
        server, [_update([[1.0]], _scalar_critic(0.0))], [5], Aggregator.FEDADAGRAD,
        server_lr=1.0, beta1=0.9, beta2=0.99, adapt_eps=1e-3,
    )
    assert new.model.W[0, 0] == pytest.approx(0.1 / 1.001, abs=1e-12)
    assert new.opt_m[0][0, 0] == pytest.approx(0.1, abs=1e-15)
    assert new.opt_v[0][0, 0] == 1.0
    assert (new.round, new.comm_bytes) == (3, 99)


@pytest.mark.parametrize("variant", ADAPTIVE)
def test_fedopt_zero_delta_is_noop(variant):
    """Updates equal to the master leave it and zero moments unchanged"""
    rng = np.random.default_rng(3)
    W = rng.random((4, 2))
    critic = init_critic(4, 2, rng, hidden=(3,))
    server = _server(W, critic)
    new = aggregate_fedopt(server, [_update(W.copy(), critic.copy())], [1], variant)
    assert np.array_equal(new.model.W, W)
    assert all(np.array_equal(p, q) for p, q in zip(new.critic.parameters(), critic.parameters()))


def test_fedadam_and_fedyogi_agree_on_first_step():
    """From v=0 both second-moment rules give v = (1 - beta2) * delta^2"""
    rng = np.random.default_rng(4)
    W = rng.random((3, 2))
    critic = init_critic(3, 2, rng, hidden=(4,))
    moved = _update(W + rng.random((3, 2)), critic.with_parameters([p + 0.1 for p in critic.parameters()]))
    adam = aggregate_fedopt(_server(W, critic), [moved], [1], Aggregator.FEDADAM)
    yogi = aggregate_fedopt(_server(W, critic), [moved], [1], Aggregator.FEDYOGI)
    assert np.array_equal(adam.model.W, yogi.model.W)
    assert all(np.array_equal(a, b) for a, b in zip(adam.opt_v, yogi.opt_v))


@pytest.mark.parametrize("variant", ADAPTIVE)
def test_fedopt_projects_W_nonnegative(variant):
    """A large negative pseudo-gradient cannot push W below zero"""
    critic = _scalar_critic(0.0)
    server = _server([[0.01, 0.5]], critic)
    new = aggregate_fedopt(server, [_update([[0.0, 0.0]], critic.copy())], [1], variant, server_lr=10.0)
    assert new.model.W.min() >= 0


def test_fedopt_rejects_fedavg_variant():
    """The adaptive rule only accepts Adagrad, Adam and Yogi"""
    critic = _scalar_critic(0.0)
    with pytest.raises(ValueError):
        aggregate_fedopt(_server([[1.0]], critic), [_update([[1.0]], critic)], [1], Aggregator.FEDAVG)
