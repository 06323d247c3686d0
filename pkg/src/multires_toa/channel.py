"""Sparse multipath channel model and its exact frequency response.

The channel impulse response is a sum of ``K`` scaled Diracs, so its CTFT is
``H(w) = sum_k a_k exp(-j w tau_k)``. Band samples on the DFT grid of an
observation of duration ``T`` follow directly from that expression.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int, check_positive_real, check_vector
from .exceptions import ConfigError, ValidationError

TWO_PI = 2.0 * np.pi

#: Delay resolution of the benchmark scenario (3 GHz simulation grid).
TAP_SPACING_S = 1.0 / 3e9

#: Tap indices (in units of ``TAP_SPACING_S``) of the default benchmark paths.
DEFAULT_TAPS = (0, 43, 70, 101, 131, 163, 197, 232)

#: Default TOA of the line-of-sight path.
DEFAULT_TOA_S = 10.1e-9

SCENARIO_VARIANTS = ("S1", "S2", "S3", "S4", "S5", "default")

# (power multiplier of MPC2 and MPC3, spacing multiplier of LOS->MPC2/MPC3)
_VARIANT_FACTORS = {
    "S1": (2.0, 1.0),
    "S2": (1.5, 1.0),
    "S3": (1.0, 1.0),
    "S4": (1.0, 2.0),
    "S5": (1.0, 3.0),
}


@dataclass(frozen=True)
class PathComponent:
    """One resolvable path: linear amplitude ``gain`` and ``delay`` in seconds."""

    gain: complex
    delay: float


@dataclass(frozen=True)
class MultipathChannel:
    """Ground-truth sparse channel.

    Paths are stored sorted by ascending delay, so ``paths[0]`` is the
    line-of-sight component. Construct from arrays with :meth:`from_arrays`.
    """

    paths: tuple

    def __post_init__(self):
        paths = tuple(self.paths)
        if not paths:
            raise ValidationError("a channel needs at least one path")
        for p in paths:
            if not np.isfinite(p.delay) or p.delay < 0:
                raise ValidationError(f"path delay must be finite and >= 0, got {p.delay}")
            if not np.isfinite(complex(p.gain)):
                raise ValidationError(f"path gain must be finite, got {p.gain}")
        order = sorted(range(len(paths)), key=lambda i: (paths[i].delay, -abs(paths[i].gain)))
        paths = tuple(paths[i] for i in order)
        delays = np.array([p.delay for p in paths])
        if np.any(np.diff(delays) <= 0):
            raise ValidationError("path delays must be distinct")
        object.__setattr__(self, "paths", paths)

    @classmethod
    def from_arrays(cls, gains, delays):
        gains = np.atleast_1d(np.asarray(gains))
        delays = np.atleast_1d(np.asarray(delays, dtype=float))
        if gains.shape != delays.shape:
            raise ValidationError(
                f"gains and delays must have the same length, got {gains.shape} and {delays.shape}"
            )
        real = not np.iscomplexobj(gains)
        return cls(tuple(
            PathComponent(float(g) if real else complex(g), float(d))
            for g, d in zip(gains, delays)
        ))

    @property
    def n_paths(self):
        return len(self.paths)

    @property
    def gains(self):
        vals = [p.gain for p in self.paths]
        if all(isinstance(g, (float, int)) for g in vals):
            return np.array(vals, dtype=float)
        return np.array(vals, dtype=complex)

    @property
    def delays(self):
        return np.array([p.delay for p in self.paths], dtype=float)

    @property
    def toa(self):
        return self.paths[0].delay

    def scaled(self, factor):
        """Return a copy with every gain multiplied by ``factor``."""
        return MultipathChannel.from_arrays(self.gains * factor, self.delays)

    def to_dict(self):
        out = []
        for p in self.paths:
            g = complex(p.gain)
            entry = {"gain": g.real, "delay_s": p.delay}
            if isinstance(p.gain, complex):
                entry["gain_imag"] = g.imag
            out.append(entry)
        return {"paths": out}

    @classmethod
    def from_dict(cls, doc):
        try:
            entries = doc["paths"]
            gains, delays = [], []
            complex_mode = any("gain_imag" in e for e in entries)
            for e in entries:
                g = float(e["gain"])
                gains.append(complex(g, float(e.get("gain_imag", 0.0))) if complex_mode else g)
                delays.append(float(e["delay_s"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed channel document: {exc!r}") from None
        return cls.from_arrays(np.array(gains), np.array(delays))


@dataclass(frozen=True)
class BandConfig:
    """One acquisition sub-band; ``center`` and ``bandwidth`` in rad/s.

    Bands built with :meth:`from_hz` keep their Hz values so that documents
    round-trip exactly.
    """

    center: float
    bandwidth: float
    _hz: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.center):
            raise ValidationError(f"band center must be finite, got {self.center}")
        check_positive_real(self.bandwidth, "bandwidth")
        if self._hz is None:
            object.__setattr__(self, "_hz", (self.center / TWO_PI, self.bandwidth / TWO_PI))

    @classmethod
    def from_hz(cls, center_hz, bandwidth_hz):
        center_hz, bandwidth_hz = float(center_hz), float(bandwidth_hz)
        return cls(TWO_PI * center_hz, TWO_PI * bandwidth_hz, (center_hz, bandwidth_hz))

    @property
    def center_hz(self):
        return self._hz[0]

    @property
    def bandwidth_hz(self):
        return self._hz[1]

    def to_dict(self):
        return {"center_hz": self.center_hz, "bandwidth_hz": self.bandwidth_hz}

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls.from_hz(doc["center_hz"], doc["bandwidth_hz"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed band document: {exc!r}") from None


def evaluate_cfr(channel, freqs):
    """Channel frequency response ``sum_k a_k exp(-j w tau_k)`` at ``freqs`` (rad/s)."""
    freqs = check_vector(freqs, "freqs", dtype=float)
    return np.exp(-1j * np.outer(freqs, channel.delays)) @ channel.gains


def dft_frequencies(band, n_samples, duration):
    """RF angular frequencies ``center + n * 2*pi/T`` probed by the DFT bins."""
    return band.center + np.arange(n_samples) * (TWO_PI / duration)


def band_channel_samples(channel, band, n_samples, duration):
    """DFT-domain channel coefficients ``H_i[n]`` of one band.

    Parameters
    ----------
    channel : MultipathChannel
    band : BandConfig
    n_samples : int
        DFT length ``N``; must be at least ``2K``.
    duration : float
        Observation duration ``T`` in seconds. Every path delay must be
        strictly below ``T`` so the per-bin phase step stays unambiguous.

    Returns
    -------
    ndarray of complex, shape (n_samples,)
    """
    n_samples = check_positive_int(n_samples, "n_samples")
    duration = check_positive_real(duration, "duration")
    if n_samples < 2 * channel.n_paths:
        raise ValidationError(
            f"n_samples={n_samples} is too small for {channel.n_paths} paths (need >= 2K)"
        )
    if channel.delays[-1] >= duration:
        raise ValidationError(
            f"path delay {channel.delays[-1]:g} s is not below the observation "
            f"duration {duration:g} s"
        )
    return evaluate_cfr(channel, dft_frequencies(band, n_samples, duration))


def make_benchmark_scenario(variant="default", *, toa=DEFAULT_TOA_S, taps=DEFAULT_TAPS,
                        tap_spacing=TAP_SPACING_S, los_power_ratio=8.0, decay=0.7):
    """Eight-path UWB-style benchmark channel.

    Delays are ``toa + taps * tap_spacing``. The LOS path carries
    ``los_power_ratio`` times the power of the second path, and powers decay
    geometrically by ``decay`` per path after that.

    Variants follow the power/spacing study: ``S1``/``S2`` scale the power of
    the second and third paths by 2 and 1.5, ``S4``/``S5`` scale their
    distance to the LOS path by 2 and 3 (later paths are shifted by the same
    amount as the third so the ordering is preserved). ``default`` is ``S3``.
    """
    if variant not in SCENARIO_VARIANTS:
        raise ValidationError(
            f"unknown scenario variant {variant!r}; expected one of {SCENARIO_VARIANTS}"
        )
    taps = np.asarray(taps, dtype=float)
    if taps.size < 3:
        raise ValidationError("the benchmark scenario needs at least three paths")
    power_mult, spacing_mult = _VARIANT_FACTORS["S3" if variant == "default" else variant]

    powers = np.concatenate(([los_power_ratio], decay ** np.arange(taps.size - 1)))
    powers[1:3] *= power_mult

    offsets = taps - taps[0]
    shifted = offsets.copy()
    shifted[1:3] = offsets[1:3] * spacing_mult
    shifted[3:] += shifted[2] - offsets[2]

    return MultipathChannel.from_arrays(np.sqrt(powers), toa + shifted * tap_spacing)
