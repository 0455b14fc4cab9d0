"""Polling, sending and age bookkeeping for gateway-based status-update systems."""

__version__ = "0.1.0"
