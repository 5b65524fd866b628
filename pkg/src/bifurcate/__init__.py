"""Bifurcating Markov chains: simulation, concentration bounds, kernel estimation."""
