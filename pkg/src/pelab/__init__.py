"""Pursuit-evasion lab: train, evaluate and fly runner-vs-chasers drone policies."""

__version__ = "0.1.0"
