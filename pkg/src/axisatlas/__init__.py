"""Axis-aware cultural atlas pipeline.

Builds a concept codebook over keyword embeddings, per-axis artwork
features, projection spaces (raw / SVD / UMAP), runs a deterministic
clustering sweep with multi-metric validation, and produces a labeled
atlas with neighborhood analytics.
"""

__version__ = "0.1.0"
