"""Intent-based networking controller with a simulated dataplane."""

__version__ = "0.1.0"
