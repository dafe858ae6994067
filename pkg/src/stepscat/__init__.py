"""Direct and inverse scattering for Schrodinger operators with steplike backgrounds."""

__version__ = "0.1.0"
