"""Security-aware controller synthesis for LTL tasks under stealthy
actuation attacks: stochastic games, Rabin automata, shaped minimax-Q
learning and model-based verification oracles."""

__version__ = "0.1.0"
