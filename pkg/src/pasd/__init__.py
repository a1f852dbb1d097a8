"""Partner-aware skill discovery for two-chef kitchen coordination."""

__version__ = "0.1.0"

from . import checkpoint, kitchen, nets

__all__ = ["checkpoint", "kitchen", "nets", "__version__"]
