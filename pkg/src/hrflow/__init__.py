"""hrflow - homogeneous Ricci flow of awesome metrics."""

__version__ = "0.1.0"
