"""Super-resolution time-of-arrival estimation from multiband channel measurements."""

from .channel import BandConfig, MultipathChannel, PathComponent, make_benchmark_scenario
from .crlb import CrlbInput, crlb_delays, numerical_fim
from .estimator import DelayEstimate, HankelParams, MultibandESPRIT, SingleBandESPRIT
from .exceptions import (
    ConfigError,
    CycleSlipError,
    DegenerateGeometryError,
    MultiresToaError,
    RankDeficiencyError,
    ValidationError,
)
from .frontend import ChannelEstimateSet, acquire_multiband

__version__ = "0.1.0"

__all__ = [
    "BandConfig",
    "ChannelEstimateSet",
    "ConfigError",
    "CrlbInput",
    "CycleSlipError",
    "DegenerateGeometryError",
    "DelayEstimate",
    "HankelParams",
    "MultibandESPRIT",
    "MultipathChannel",
    "MultiresToaError",
    "PathComponent",
    "RankDeficiencyError",
    "SingleBandESPRIT",
    "ValidationError",
    "__version__",
    "acquire_multiband",
    "crlb_delays",
    "make_benchmark_scenario",
    "numerical_fim",
]
