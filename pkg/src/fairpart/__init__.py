"""Fair distributions of point-cloud measures by iterated convex partitions."""

__version__ = "0.1.0"
