"""Perception, conditioning and restoration networks."""
