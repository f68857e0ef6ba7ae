"""Distributed data-plane verification: header spaces, DV-Networks and the DV protocol."""

__version__ = "0.1.0"
