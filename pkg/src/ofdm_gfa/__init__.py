"""ML device activity detection for OFDM grant-free access under frequency-selective fading."""

__version__ = "0.1.0"
