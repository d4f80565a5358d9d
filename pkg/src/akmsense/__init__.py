"""Energy-detection spectrum sensing over alpha-kappa-mu fading channels."""

__version__ = "0.1.0"
