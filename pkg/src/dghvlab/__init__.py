"""DGHV encryption and a lattice attack that recovers its plaintext bits."""

__version__ = "0.1.0"
