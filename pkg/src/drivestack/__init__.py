"""Modular automated-driving stack with a deterministic closed-loop simulator."""
from ._core import BACKEND
from .messages import ControlCommand, DriveMode

__version__ = "0.1.0"

__all__ = ["BACKEND", "ControlCommand", "DriveMode", "__version__"]
