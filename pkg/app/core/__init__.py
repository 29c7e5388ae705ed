"""Finite-field algebra, line tests, characterization and codes."""
