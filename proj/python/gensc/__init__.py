"""Python bindings for the gensc semantic-communication link simulator."""

from ._core import *  # noqa: F401,F403
from ._core import GenscError, Tensor

__all__ = [name for name in dir() if not name.startswith("_")]
