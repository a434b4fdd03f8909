"""Bug injection, pixel-exact bug labels and reconstruction-based bug detection for a small software-rendered 3D world."""

__version__ = "0.1.0"
