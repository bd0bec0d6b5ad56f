"""Spatiotemporal forecasting with vector-quantized candidate generation and
beam-search rollout on synthetic PDE grids."""

__version__ = "0.1.0"
