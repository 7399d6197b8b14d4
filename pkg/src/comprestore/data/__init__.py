"""Synthetic compositional-degradation benchmark: catalog, synthesis, dataset."""
