"""Thresholding, disaggregation and intrinsic-error scoring for NILM."""

__version__ = "0.1.0"
