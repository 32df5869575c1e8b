"""Long-run qualification dynamics under fairness-constrained threshold policies."""

__version__ = "0.1.0"
