"""Localization and self-trapping in circuit-QED networks with varied connectivity."""

__version__ = "0.1.0"
