"""Federated NMF topic modeling with a SMILE mutual-information regularizer."""

__version__ = "0.1.0"
