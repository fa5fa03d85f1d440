"""Exact Hausdorff premeasures and subset extraction on Cantor-space tree codes."""

__version__ = "0.1.0"
