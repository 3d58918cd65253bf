"""Learning image classifiers under class-conditional label noise."""

__version__ = "0.1.0"
