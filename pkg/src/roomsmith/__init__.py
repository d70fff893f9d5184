"""Interactive furniture-layout agent toolkit."""

__version__ = "0.1.0"
