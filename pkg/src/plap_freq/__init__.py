"""p-Laplace frequency function laboratory."""

__version__ = "0.1.0"
