"""regbridge: optimistic/pessimistic regression losses and bias-variance sweeps."""

__version__ = "0.1.0"
