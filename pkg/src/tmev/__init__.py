"""Token-supply-change detection and MEV bundle search over a simulated chain."""

__version__ = "0.1.0"
