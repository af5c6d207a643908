"""
Error types for the federated topic modeling toolkit.

Every error also derives from ValueError, so callers that treat bad input
generically keep working.
"""


class FedNmfError(ValueError):
    """Base class for all toolkit errors"""


# corpus
class EmptyVocabulary(FedNmfError):
    pass


class DegenerateSplit(FedNmfError):
    pass


# partition
class InvalidConcentration(FedNmfError):
    pass


class InvalidLabelDistribution(FedNmfError):
    pass


class TooFewDocuments(FedNmfError):
    pass


# factorization / mi_estimator
class DimensionMismatch(FedNmfError):
    pass


class BatchTooSmall(FedNmfError):
    pass


class InvalidBounds(FedNmfError):
    pass


# federation
class EmptyUpdateSet(FedNmfError):
    pass


# evaluation
class TooFewEmbeddedWords(FedNmfError):
    pass


class NoScorableTopics(FedNmfError):
    pass


class EmptyTable(FedNmfError):
    pass


class InconsistentDimension(FedNmfError):
    pass


class SingleClass(FedNmfError):
    pass


class VocabularyMismatch(FedNmfError):
    pass


# file formats
class MalformedFile(FedNmfError):
    pass
