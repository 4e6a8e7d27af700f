"""Monte Carlo simulator for switched multi-element-antenna small cells serving demand hotspots."""

__version__ = "0.1.0"
