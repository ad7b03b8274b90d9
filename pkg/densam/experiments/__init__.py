"""
Experiments - Gaussian-mixture ground truth, Monte Carlo sampling and the benchmark sweeps
"""
