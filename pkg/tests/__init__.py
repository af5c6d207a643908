"""Tests for the federated NMF topic modeling package."""
