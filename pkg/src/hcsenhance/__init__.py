"""Enhancement and quantification of high-content screening fluorescence images."""

__version__ = "0.1.0"
