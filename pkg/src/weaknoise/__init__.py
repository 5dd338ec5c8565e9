"""Weak-value measurement under noise on the measured system.

Simulation of weak, strong and postselected measurements, first-order noise
bias of weak values, operator reconstruction and its certification.
"""

from .channels import ChannelSpec, KrausChannel, apply_channel, build_channel, compose_channels
from .errors import ConfigError, WeakNoiseError
from .weakvalue import BiasValue, WeakValue, bias_first_order_analytic, bias_first_order_numeric, noisy_weak_value, weak_value

__version__ = "0.1.0"

__all__ = [
    "BiasValue",
    "ChannelSpec",
    "ConfigError",
    "KrausChannel",
    "WeakNoiseError",
    "WeakValue",
    "__version__",
    "apply_channel",
    "bias_first_order_analytic",
    "bias_first_order_numeric",
    "build_channel",
    "compose_channels",
    "noisy_weak_value",
    "weak_value",
]
