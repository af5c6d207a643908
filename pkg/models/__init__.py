"""Domain types for federated NMF topic modeling."""

from .domain import (
    ClassificationReport,
    ClientFactors,
    ClientShard,
    ClientState,
    CountMatrix,
    Document,
    EmbeddingTable,
    MiCritic,
    RoundMetrics,
    ServerState,
    TopicModel,
    TopicReport,
    Vocabulary,
)

__all__ = [
    "Document",
    "Vocabulary",
    "CountMatrix",
    "TopicModel",
    "ClientFactors",
    "MiCritic",
    "ClientShard",
    "ClientState",
    "ServerState",
    "RoundMetrics",
    "EmbeddingTable",
    "TopicReport",
    "ClassificationReport",
]
