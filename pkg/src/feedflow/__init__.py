"""feedflow: feed-queue analytics and contagion simulation for event streams."""

__version__ = "0.1.0"
