"""Desk-scale auto-tuning: tunable components, a shared-memory channel, a side agent, and black-box optimizers."""

__version__ = "0.1.0"
