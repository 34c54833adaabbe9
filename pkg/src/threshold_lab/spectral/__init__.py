"""Numerical core: Green functions, Γ-matrix, threshold classification and probes."""
