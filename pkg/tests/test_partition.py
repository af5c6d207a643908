"""
Tests for Dirichlet label-skew partitioning of a corpus across clients.
"""

import numpy as np
import pytest

from fednmf.config import PartitionSpec
from fednmf.errors import InvalidConcentration, InvalidLabelDistribution, MalformedFile, TooFewDocuments
from fednmf.partition import (
    global_label_distribution,
    partition_clients,
    read_shard_manifest,
    sample_dirichlet,
    total_variation,
    write_shard_manifest,
)
from fednmf.synthetic import balanced_label_matrix
from models import CountMatrix


def _assert_disjoint(shards, N):
    seen = set()
    for shard in shards:
        assert not seen.intersection(shard.columns)
        seen.update(shard.columns)
        assert all(0 <= c < N for c in shard.columns)


def test_dirichlet_single_component():
    """Dir(c) over one label is the point mass [1.0]"""
    assert sample_dirichlet([3.0], np.random.default_rng(0)).tolist() == [1.0]


def test_dirichlet_lies_on_simplex():
    """Draws are nonnegative and sum to one across extreme concentrations"""
    rng = np.random.default_rng(1)
    for alpha in ([0.01, 0.01, 0.01], [1.0, 2.0], [1e-4] * 10, [1e6, 1e6]):
        q = sample_dirichlet(alpha, rng)
        assert np.all(q >= 0)
        assert abs(q.sum() - 1.0) < 1e-12


def test_dirichlet_large_concentration_concentrates_on_mean():
    """Dir(1e6 * p) draws sit on p"""
    rng = np.random.default_rng(2)
    p = np.array([0.5, 0.3, 0.2])
    draws = np.array([sample_dirichlet(1e6 * p, rng) for _ in range(1000)])
    assert np.abs(draws.mean(axis=0) - p).max() <= 0.01


def test_dirichlet_invalid_concentration():
    """Zero, negative, empty and infinite concentrations are rejected"""
    rng = np.random.default_rng(0)
    for bad in ([0.0, 1.0], [-1.0], [], [np.inf, 1.0]):
        with pytest.raises(InvalidConcentration):
            sample_dirichlet(bad, rng)


def test_single_client_gets_whole_corpus():
    """K=1 yields one shard holding every column with the global histogram"""
    matrix = balanced_label_matrix(40, 4)
    shards = partition_clients(matrix, PartitionSpec(K=1, alpha=0.5, seed=3))
    assert len(shards) == 1
    assert shards[0].columns == tuple(range(40))
    assert shards[0].label_mix.tolist() == [10, 10, 10, 10]


def test_equal_sizes_and_leftovers_dropped():
    """N=105, K=10 gives ten disjoint shards of 10; 5 documents are unassigned"""
    matrix = balanced_label_matrix(105, 3)
    shards = partition_clients(matrix, PartitionSpec(K=10, alpha=1.0, seed=0))
    assert [s.size for s in shards] == [10] * 10
    assert [s.client_id for s in shards] == list(range(10))
    _assert_disjoint(shards, 105)


def test_sample_allocation_sizes_and_disjointness():
    """Sample allocation still gives equal, disjoint shards"""
    matrix = balanced_label_matrix(200, 4)
    shards = partition_clients(matrix, PartitionSpec(K=7, alpha=0.3, seed=5, allocation="sample"))
    assert [s.size for s in shards] == [200 // 7] * 7
    _assert_disjoint(shards, 200)


def test_too_few_documents():
    """K clients need at least K documents"""
    with pytest.raises(TooFewDocuments):
        partition_clients(balanced_label_matrix(3, 2), PartitionSpec(K=4, alpha=1.0))


def test_invalid_global_distribution():
    """The global label distribution must be a distribution covering every label"""
    matrix = balanced_label_matrix(20, 2)
    with pytest.raises(InvalidLabelDistribution):
        partition_clients(matrix, PartitionSpec(K=2, alpha=1.0), global_p=[0.7, 0.7])
    with pytest.raises(InvalidLabelDistribution):
        # label 1 occurs but p covers only label 0
        partition_clients(matrix, PartitionSpec(K=2, alpha=1.0), global_p=[1.0])


def test_partition_is_deterministic():
    """Equal specs give equal shards"""
    matrix = balanced_label_matrix(300, 5)
    spec = PartitionSpec(K=6, alpha=0.2, seed=11)
    first = partition_clients(matrix, spec)
    second = partition_clients(matrix, spec)
    assert [s.columns for s in first] == [s.columns for s in second]

    other = partition_clients(matrix, PartitionSpec(K=6, alpha=0.2, seed=12))
    assert [s.columns for s in first] != [s.columns for s in other]


def test_label_mix_matches_columns():
    """Each shard's label mix counts the labels of its columns"""
    matrix = balanced_label_matrix(120, 3)
    for shard in partition_clients(matrix, PartitionSpec(K=4, alpha=0.5, seed=2)):
        expected = np.bincount(matrix.labels[list(shard.columns)], minlength=3)
        assert shard.label_mix.tolist() == expected.tolist()


def test_small_alpha_gives_near_single_label_clients():
    """alpha=0.01 on a balanced 4-class corpus: mean max-label share >= 0.9"""
    matrix = balanced_label_matrix(6000, 4)
    shards = partition_clients(matrix, PartitionSpec(K=30, alpha=0.01, seed=0))
    shares = [s.label_mix.max() / s.size for s in shards]
    assert np.mean(shares) >= 0.9


def test_huge_alpha_gives_near_iid_clients():
    """alpha=1e6: every client's label histogram is within TV 0.05 of the global one"""
    matrix = balanced_label_matrix(6000, 4)
    p = global_label_distribution(matrix)
    shards = partition_clients(matrix, PartitionSpec(K=30, alpha=1e6, seed=0))
    assert max(total_variation(s.label_mix, p) for s in shards) <= 0.05


def test_exhausted_pools_fall_back_to_other_labels():
    """A client wanting a rare label still receives floor(N/K) documents"""
    labels = np.array([0] * 90 + [1] * 10)
    matrix = CountMatrix.from_dense(np.ones((1, 100)), labels=labels)
    shards = partition_clients(matrix, PartitionSpec(K=2, alpha=0.01, seed=4))
    assert [s.size for s in shards] == [50, 50]
    _assert_disjoint(shards, 100)


def test_total_variation():
    """Total variation normalizes its inputs first"""
    assert total_variation([1, 0], [0, 1]) == 1.0
    assert total_variation([2, 2], [0.5, 0.5]) == 0.0


def test_shard_manifest_round_trip(tmp_path):
    """Shards written to a manifest read back unchanged"""
    matrix = balanced_label_matrix(50, 2)
    shards = partition_clients(matrix, PartitionSpec(K=5, alpha=1.0, seed=1))
    path = write_shard_manifest(shards, tmp_path / "shards.txt")
    assert path.read_text(encoding="utf-8").splitlines()[0].startswith("0: ")

    loaded = read_shard_manifest(path, matrix)
    assert [s.columns for s in loaded] == [s.columns for s in shards]
    assert [s.label_mix.tolist() for s in loaded] == [s.label_mix.tolist() for s in shards]


def test_shard_manifest_rejects_overlap(tmp_path):
    """A document assigned to two clients is malformed"""
    matrix = balanced_label_matrix(10, 2)
    path = tmp_path / "shards.txt"
    path.write_text("0: 0,1,2\n1: 2,3\n", encoding="utf-8")
    with pytest.raises(MalformedFile):
        read_shard_manifest(path, matrix)
