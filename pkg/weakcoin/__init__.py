"""weakcoin - bounds, certificates and cheating searches for weak coin-flipping protocols."""

__version__ = "0.1.0"
