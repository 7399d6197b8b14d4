"""Perception and restoration objectives."""
