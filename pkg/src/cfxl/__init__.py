"""Desk-scale simulator for user-centric cell-free XL-MIMO uplink with
two-layer multi-agent clustering and power control."""
from .config import PowerParams, SystemConfig
from .environment import CfxlEnv
from .kernels import BACKEND
from .scenario import Scenario

__version__ = "0.1.0"

__all__ = ["BACKEND", "CfxlEnv", "PowerParams", "Scenario", "SystemConfig", "__version__"]
