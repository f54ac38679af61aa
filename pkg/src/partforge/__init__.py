"""Part-aware image-to-3D pipeline engine."""

__version__ = "0.1.0"
