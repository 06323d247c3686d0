"""Hankel/ESPRIT delay estimators."""

from .base import MultibandESPRIT, SingleBandESPRIT, check_estimate_set, check_estimate_sets
from .esprit import (
    CYCLE_MARGIN,
    MODES,
    DelayEstimate,
    estimate_multiband,
    joint_diagonalize,
    single_band_esprit,
    solve_invariances,
    stack_two_band,
    unwrap_and_combine,
    wrap_phase,
)
from .subspace import HankelParams, build_hankel, checked_pinv, order_from_gap, signal_subspace

__all__ = [
    "CYCLE_MARGIN",
    "MODES",
    "DelayEstimate",
    "HankelParams",
    "MultibandESPRIT",
    "SingleBandESPRIT",
    "build_hankel",
    "check_estimate_set",
    "check_estimate_sets",
    "checked_pinv",
    "estimate_multiband",
    "joint_diagonalize",
    "order_from_gap",
    "signal_subspace",
    "single_band_esprit",
    "solve_invariances",
    "stack_two_band",
    "unwrap_and_combine",
    "wrap_phase",
]
