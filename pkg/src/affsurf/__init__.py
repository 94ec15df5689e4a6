"""Affine surface area, curvature, floating bodies and random polytopes."""

__version__ = "0.1.0"
