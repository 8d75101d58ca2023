"""Federated wireless traffic prediction under model-poisoning attacks."""

__version__ = "0.1.0"
