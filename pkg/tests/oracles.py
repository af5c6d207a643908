"""
Independent reference implementations for numerical tests.

Written with plain loops so they share no code path with the vectorized
library functions they check.
"""

import math

import numpy as np

from fednmf.mi_estimator import _pair_forward


def loop_critic_forward(critic, x):
    """Per-neuron loop evaluation of the critic on one input vector"""
    values = [float(v) for v in x]
    last = len(critic.weights) - 1
    for layer, (w, b) in enumerate(zip(critic.weights, critic.biases)):
        out = []
        for j in range(w.shape[1]):
            s = float(b[j])
            for i in range(w.shape[0]):
                s += values[i] * float(w[i, j])
            out.append(s if layer == last else max(s, 0.0))
        values = out
    return values[0]


def loop_smile(critic, A, H, batch):
    """Double-loop SMILE estimate over every ordered pair of the batch"""
    B = len(batch)
    tau = critic.tau
    cols = {j: A.dense_columns([j])[:, 0] for j in batch}

    def score(j, jp):
        return loop_critic_forward(critic, np.concatenate([cols[j], H[:, jp]]))

    joint = sum(score(j, j) for j in batch) / B
    total = 0.0
    for j in batch:
        for jp in batch:
            if j != jp:
                s = score(j, jp)
                e = math.exp(s) if s < 700 else math.inf
                total += min(max(e, math.exp(-tau)), math.exp(tau))
    return joint - math.log(total / (B * (B - 1)))


def activation_pattern(critic, A, H, batch):
    """Signs of every hidden pre-activation plus the clip-interior mask of all pair scores"""
    batch = np.asarray(batch)
    scores, (pre, _) = _pair_forward(critic, A.dense_columns(batch).T, H[:, batch].T)
    masks = [p > 0 for p in pre[:-1]]
    masks.append(np.abs(scores) < critic.tau)
    return masks


def same_pattern(p, q):
    return all(np.array_equal(a, b) for a, b in zip(p, q))


def relative_error(analytic, numeric, floor=1e-3):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
