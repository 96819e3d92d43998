"""Space-fractional Riemann-Liouville operators on metric graphs."""

__version__ = "0.1.0"
