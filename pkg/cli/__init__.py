"""Command-line surface of the federated topic modeling toolkit."""
