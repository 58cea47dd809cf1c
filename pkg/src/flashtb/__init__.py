"""Trip-based journey planning with arc-flag speedups."""

__version__ = "0.1.0"
