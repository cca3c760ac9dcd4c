"""Least gradient solver and verification toolkit for convex polygons."""
