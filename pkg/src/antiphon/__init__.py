"""Real-time predictive gesture server built on a mixture-density RNN."""

__version__ = "0.1.0"
