"""Detect anomalously profitable resales in a collectibles market."""

__version__ = "0.1.0"
