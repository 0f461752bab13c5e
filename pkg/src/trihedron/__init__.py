"""Optimal transmission of a reference frame through N spins."""
