"""
densam - Dense Associative Memory laboratory

Log-sum-ReLU (Epanechnikov) and log-sum-exp energies, exact retrieval,
emergent-memory enumeration and desk-scale benchmark sweeps.
"""

__version__ = "0.1.0"
