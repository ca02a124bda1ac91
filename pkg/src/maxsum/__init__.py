"""Simulation and verification toolkit for triangular-array max-sum processes with renewal stopping."""
