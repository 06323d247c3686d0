"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from .exceptions import ValidationError

#: Smallest admissible magnitude of a training or filter spectrum bin.
SPECTRUM_EPS = 1e-9


def check_vector(x, name="x", *, length=None, dtype=np.complex128):
    """Return ``x`` as a finite 1-D array of ``dtype``.

    Parameters
    ----------
    x : array_like
        Input vector.
    name : str
        Used in error messages.
    length : int, optional
        Required length.
    dtype : numpy dtype
        Target dtype.
    """
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValidationError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_matrix(a, name="matrix", *, square=False, min_rows=1, min_cols=1):
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    if arr.shape[0] < min_rows or arr.shape[1] < min_cols:
        raise ValidationError(
            f"{name} must be at least {min_rows}x{min_cols}, got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_positive_int(value, name, *, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive_real(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a real number, got {value!r}") from None
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be finite and > 0, got {value}")
    return value


def check_nonzero_spectrum(values, name, eps=SPECTRUM_EPS):
    """Reject a spectrum with any bin of magnitude ``<= eps``."""
    bad = np.flatnonzero(np.abs(values) <= eps)
    if bad.size:
        raise ValidationError(
            f"{name} has {bad.size} bin(s) with |value| <= {eps:g} "
            f"(first at index {bad[0]})"
        )
    return values


def check_bands(bands):
    """Validate an ordered multiband set.

    Bands must share one bandwidth, have strictly increasing centers and must
    not overlap. Returns the bands as a tuple.
    """
    bands = tuple(bands)
    if not bands:
        raise ValidationError("at least one band is required")
    width = bands[0].bandwidth
    for i, band in enumerate(bands):
        if not np.isclose(band.bandwidth, width, rtol=1e-12, atol=0.0):
            raise ValidationError(
                f"band {i} bandwidth {band.bandwidth:g} rad/s differs from "
                f"band 0 bandwidth {width:g} rad/s"
            )
    for i in range(1, len(bands)):
        lo, hi = bands[i - 1], bands[i]
        if hi.center <= lo.center:
            raise ValidationError(
                f"band centers must be strictly increasing: band {i - 1} "
                f"({lo.center_hz:g} Hz) and band {i} ({hi.center_hz:g} Hz)"
            )
        gap = hi.center - lo.center
        if gap < 0.5 * (lo.bandwidth + hi.bandwidth) * (1 - 1e-12):
            raise ValidationError(
                f"bands {i - 1} and {i} overlap: centers {lo.center_hz:g} Hz and "
                f"{hi.center_hz:g} Hz are closer than the bandwidth "
                f"{lo.bandwidth_hz:g} Hz"
            )
    return bands
