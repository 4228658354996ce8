"""Universal outlier hypothesis tests, error exponents, and exact error oracles."""

from .simplex import Pmf, TypeVector, bhattacharyya, chernoff, entropy, kl

__all__ = ["Pmf", "TypeVector", "bhattacharyya", "chernoff", "entropy", "kl"]

__version__ = "0.1.0"
