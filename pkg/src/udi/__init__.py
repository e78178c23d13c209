"""Natural-language data discovery over linked metadata tables."""

__version__ = "0.1.0"
