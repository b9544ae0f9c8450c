"""laybench: lay summarisation pipeline and layness evaluation toolkit."""

__version__ = "0.1.0"
