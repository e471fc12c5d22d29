"""No-regret learning in unknown repeated games with GP-modelled rewards."""

__version__ = "0.1.0"
