"""Multi-fidelity co-Kriging for scenario-based AV evaluation."""

__version__ = "0.1.0"
