"""Two-modality classifier building and late fusion."""

from ._latefusion import *  # noqa: F401,F403
from ._latefusion import LatefusionError, FeatureTable

__all__ = [name for name in dir() if not name.startswith("_")]
