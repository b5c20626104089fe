"""Circular diffusions: simulation, transition densities, estimation."""
