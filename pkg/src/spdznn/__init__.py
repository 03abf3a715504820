"""n-party secure computation with Paillier preprocessing and secure NN layers."""

__version__ = "0.1.0"
