"""Centroid-distance soft-coding ECOC and baselines."""
