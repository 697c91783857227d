# cython: language_level=3
"""Compiled kernels (placeholder while the package is scaffolded)."""

BACKEND = "compiled"
