"""Shared fixtures: small corpora, matrices, critics and embedding tables."""

import numpy as np
import pytest

from fednmf.corpus import build_vocabulary, vectorize
from fednmf.mi_estimator import init_critic
from fednmf.synthetic import low_rank_matrix, planted_corpus
from models import CountMatrix, EmbeddingTable


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_counts(rng):
    """V=6, N=8 integer count matrix with no empty column"""
    dense = rng.integers(0, 4, size=(6, 8)).astype(float)
    dense[0, :] += 1
    return CountMatrix.from_dense(dense, labels=np.arange(8) % 2)


@pytest.fixture
def small_critic(rng):
    """Default-architecture critic for V=6, k=3"""
    return init_critic(6, 3, rng)


@pytest.fixture
def planted_matrix():
    """200 labeled documents, 4 classes, class-specific term blocks"""
    docs, _ = planted_corpus(num_docs=200, num_classes=4, seed=7)
    vocab = build_vocabulary(docs)
    matrix, flagged = vectorize(docs, vocab)
    assert not flagged
    return matrix


@pytest.fixture
def low_rank():
    """A = W* H* with V=30, N=200, k=5"""
    return low_rank_matrix(V=30, N=200, k=5, seed=3)


@pytest.fixture
def toy_embeddings():
    """Three-word table: a and b parallel, c orthogonal to both"""
    return EmbeddingTable(
        dim=2,
        vectors={
            "a": np.array([1.0, 0.0]),
            "b": np.array([1.0, 0.0]),
            "c": np.array([0.0, 1.0]),
        },
    )
