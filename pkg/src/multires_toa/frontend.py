"""DFT-domain simulation of the multibranch receiver.

Each branch observes ``x[n] = g[n] H_i[n] s[n] + w[n]`` where ``s`` is the
known training spectrum, ``g`` the known filter response and ``w`` circular
white Gaussian noise. Deconvolution by ``g * s`` yields the channel
coefficients used by the estimators.

SNR convention: ``SNR = mean_n |g[n] H_1[n] s[n]|^2 / sigma_w^2``, the
average per-bin signal power of the first band over the noise variance. The
noise variance obtained this way is applied to every band.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    SPECTRUM_EPS,
    check_bands,
    check_nonzero_spectrum,
    check_positive_int,
    check_positive_real,
    check_vector,
)
from .channel import TWO_PI, BandConfig, band_channel_samples, dft_frequencies
from .exceptions import ConfigError, ValidationError


@dataclass(frozen=True)
class BandObservation:
    """Observed DFT samples of one band together with the known spectra."""

    x: np.ndarray
    s: np.ndarray
    g: np.ndarray
    band: object
    n_samples: int
    duration: float
    noise_variance: float = 0.0

    def __post_init__(self):
        n = self.n_samples
        for name in ("x", "s", "g"):
            object.__setattr__(self, name, check_vector(getattr(self, name), name, length=n))
        check_nonzero_spectrum(self.s, "training spectrum")
        check_nonzero_spectrum(self.g, "filter response")


@dataclass(frozen=True)
class ChannelEstimateSet:
    """Deconvolved per-band channel vectors sharing one DFT grid.

    Attributes
    ----------
    bands : tuple of (BandConfig, ndarray)
        Band and its deconvolved vector ``h_i``, in increasing center order.
    delta_omega : float
        DFT bin spacing ``2*pi/T`` in rad/s.
    noise_variance : float
        Variance of the additive receiver noise before deconvolution. Equals
        the per-bin variance of ``h_i`` when the spectra are flat.
    bin_variances : tuple of ndarray
        Exact per-bin noise variance of each ``h_i`` after deconvolution.
    """

    bands: tuple
    delta_omega: float
    noise_variance: float = 0.0
    bin_variances: tuple = field(default=None, repr=False)

    def __post_init__(self):
        pairs = tuple((b, check_vector(h, "h")) for b, h in self.bands)
        if not pairs:
            raise ValidationError("a ChannelEstimateSet needs at least one band")
        n = pairs[0][1].shape[0]
        if any(h.shape[0] != n for _, h in pairs):
            raise ValidationError("all channel vectors must have the same length")
        check_bands([b for b, _ in pairs])
        check_positive_real(self.delta_omega, "delta_omega")
        object.__setattr__(self, "bands", pairs)
        if self.bin_variances is None:
            flat = np.full(n, float(self.noise_variance))
            object.__setattr__(self, "bin_variances", tuple(flat for _ in pairs))

    @property
    def n_bands(self):
        return len(self.bands)

    @property
    def n_samples(self):
        return self.bands[0][1].shape[0]

    @property
    def duration(self):
        return TWO_PI / self.delta_omega

    @property
    def centers(self):
        return np.array([b.center for b, _ in self.bands])

    @property
    def vectors(self):
        return np.stack([h for _, h in self.bands])

    def subset(self, indices):
        """Return a new set restricted to the bands at ``indices``."""
        indices = list(indices)
        return ChannelEstimateSet(
            tuple(self.bands[i] for i in indices),
            self.delta_omega,
            self.noise_variance,
            tuple(self.bin_variances[i] for i in indices),
        )


def resolve_spectrum(spec, band, n_samples, duration, name="spectrum"):
    """Evaluate a spectrum specification on the DFT grid of ``band``.

    ``spec`` may be ``None`` or ``"flat"`` (all ones), a scalar, an array of
    length ``n_samples`` or a callable receiving the baseband angular
    frequencies ``n * 2*pi/T`` and returning the bin values.
    """
    if spec is None or (isinstance(spec, str) and spec == "flat"):
        values = np.ones(n_samples, dtype=complex)
    elif callable(spec):
        baseband = dft_frequencies(band, n_samples, duration) - band.center
        values = np.asarray(spec(baseband), dtype=complex)
    elif np.isscalar(spec):
        values = np.full(n_samples, complex(spec))
    else:
        values = np.asarray(spec, dtype=complex)
    values = check_vector(values, name, length=n_samples)
    return check_nonzero_spectrum(values, name)


def _noise_rng(rng_seed):
    words = [int(w) for w in np.atleast_1d(rng_seed)]
    if any(w < 0 for w in words):
        raise ValidationError(f"seed words must be non-negative, got {rng_seed!r}")
    return np.random.default_rng(np.random.SeedSequence(words))


def complex_noise(variance, n_samples, rng_seed):
    """Circular complex Gaussian noise of total variance ``variance`` per bin.

    Draws are laid out bin by bin, so a longer vector from the same seed
    extends a shorter one.
    """
    z = _noise_rng(rng_seed).standard_normal((n_samples, 2))
    return np.sqrt(variance / 2.0) * (z[:, 0] + 1j * z[:, 1])


def noise_variance_for_snr(signal, snr_db):
    """Noise variance giving ``snr_db`` for the noiseless per-bin ``signal``."""
    if np.isposinf(snr_db):
        return 0.0
    if not np.isfinite(snr_db):
        raise ValidationError(f"snr_db must be finite or +inf, got {snr_db}")
    return float(np.mean(np.abs(signal) ** 2) / 10.0 ** (snr_db / 10.0))


def simulate_observation(channel, band, n_samples, duration, training=None, filter=None,
                         snr_db=np.inf, rng_seed=0, *, noise_variance=None):
    """Simulate the DFT samples of one receiver branch.

    Parameters
    ----------
    channel : MultipathChannel
    band : BandConfig
    n_samples, duration
        DFT length ``N`` and observation duration ``T`` (s).
    training, filter
        Spectrum specifications, see :func:`resolve_spectrum`.
    snr_db : float
        Per-bin SNR of this band; ``inf`` disables noise. Ignored when
        ``noise_variance`` is given.
    rng_seed : int or sequence of int
        Seed words for the noise generator.
    noise_variance : float, optional
        Explicit noise variance, used to share one noise level across bands.
    """
    n_samples = check_positive_int(n_samples, "n_samples")
    s = resolve_spectrum(training, band, n_samples, duration, "training spectrum")
    g = resolve_spectrum(filter, band, n_samples, duration, "filter response")
    clean = g * band_channel_samples(channel, band, n_samples, duration) * s
    if noise_variance is None:
        noise_variance = noise_variance_for_snr(clean, snr_db)
    elif noise_variance < 0 or not np.isfinite(noise_variance):
        raise ValidationError(f"noise_variance must be finite and >= 0, got {noise_variance}")
    x = clean
    if noise_variance > 0:
        x = clean + complex_noise(noise_variance, n_samples, rng_seed)
    return BandObservation(x, s, g, band, n_samples, float(duration), float(noise_variance))


def deconvolve(obs):
    """Divide out the known training and filter spectra: ``x / (g * s)``."""
    gs = obs.g * obs.s
    check_nonzero_spectrum(gs, "g * s", SPECTRUM_EPS)
    return obs.x / gs


def acquire_multiband(channel, bands, n_samples, duration, snr_db=np.inf, rng_seed=0,
                      training=None, filter=None):
    """Simulate and deconvolve all branches of the multiband receiver.

    The noise variance is set from the SNR on the first band and reused for
    every band. Band ``i`` draws its noise from seed words
    ``(*rng_seed, i)``, so branches are independent and reproducible.
    """
    bands = check_bands(bands)
    seed_words = [int(w) for w in np.atleast_1d(rng_seed)]
    first = simulate_observation(channel, bands[0], n_samples, duration, training, filter,
                                 snr_db=np.inf)
    variance = noise_variance_for_snr(first.x, snr_db)

    pairs, bin_vars = [], []
    for i, band in enumerate(bands):
        obs = simulate_observation(channel, band, n_samples, duration, training, filter,
                                   rng_seed=seed_words + [i], noise_variance=variance)
        pairs.append((band, deconvolve(obs)))
        bin_vars.append(variance / np.abs(obs.g * obs.s) ** 2)
    return ChannelEstimateSet(tuple(pairs), TWO_PI / duration, variance, tuple(bin_vars))


@dataclass(frozen=True)
class AcquisitionConfig:
    """Receiver settings as read from a JSON document (frequencies in Hz).

    Document keys: ``bands`` (list of ``{"center_hz", "bandwidth_hz"}``),
    ``n_samples``, ``duration_s``, ``snr_db`` and ``seed``. Channel ``paths``
    may share the same document and are ignored here.
    """

    bands: tuple
    n_samples: int
    duration: float
    snr_db: float = np.inf
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bands", check_bands(self.bands))
        check_positive_int(self.n_samples, "n_samples")
        check_positive_real(self.duration, "duration")
        if np.isnan(self.snr_db):
            raise ValidationError("snr_db must not be NaN")

    def acquire(self, channel, training=None, filter=None):
        return acquire_multiband(channel, self.bands, self.n_samples, self.duration,
                                 self.snr_db, self.seed, training, filter)

    def to_dict(self):
        return {
            "bands": [b.to_dict() for b in self.bands],
            "n_samples": self.n_samples,
            "duration_s": self.duration,
            "snr_db": self.snr_db,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            bands = tuple(BandConfig.from_dict(b) for b in doc["bands"])
            return cls(bands, int(doc["n_samples"]), float(doc["duration_s"]),
                       float(doc.get("snr_db", np.inf)), int(doc.get("seed", 0)))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed acquisition document: {exc!r}") from None
