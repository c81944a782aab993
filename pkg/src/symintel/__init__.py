"""Signed-reward universal intelligence with a reward-symmetric reference machine."""

from .spaces import Space, SpaceConfig, default_space, make_space, validate_space

__all__ = ["Space", "SpaceConfig", "default_space", "make_space", "validate_space"]
__version__ = "0.1.0"
