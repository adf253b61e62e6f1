"""Challenge-response detection of real-time deepfakes in live video sessions."""

__version__ = "0.1.0"
