"""Estimator objects with a scikit-learn compatible interface.

A "sample" is one acquisition: a :class:`~multires_toa.frontend.ChannelEstimateSet`.
``fit`` estimates the delays of a single acquisition and stores them in
fitted attributes; ``predict`` and ``transform`` apply the same
hyper-parameters to a sequence of acquisitions.

>>> from multires_toa import MultibandESPRIT
>>> est = MultibandESPRIT(n_paths=8)              # doctest: +SKIP
>>> est.fit(acquisition).toa_                     # doctest: +SKIP
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ValidationError
from ..frontend import ChannelEstimateSet
from .esprit import MODES, estimate_multiband, single_band_esprit
from .subspace import HankelParams


def check_estimate_set(X, *, min_bands=1):
    """Validate a single acquisition."""
    if not isinstance(X, ChannelEstimateSet):
        raise ValidationError(
            f"expected a ChannelEstimateSet, got {type(X).__name__}"
        )
    if X.n_bands < min_bands:
        raise ValidationError(f"need at least {min_bands} band(s), got {X.n_bands}")
    return X


def check_estimate_sets(X, *, min_bands=1):
    """Validate a batch of acquisitions; a single set is wrapped in a list."""
    if isinstance(X, ChannelEstimateSet):
        X = [X]
    X = list(X)
    if not X:
        raise ValidationError("empty batch of acquisitions")
    return [check_estimate_set(x, min_bands=min_bands) for x in X]


class _DelayEstimatorMixin:
    """Batch helpers shared by the delay estimators."""

    def _estimate(self, X):
        raise NotImplementedError

    def fit(self, X, y=None):
        """Estimate the path delays of one acquisition.

        Sets ``estimate_``, ``delays_``, ``toa_`` and ``hankel_params_``.
        """
        X = check_estimate_set(X, min_bands=self._min_bands)
        params, est = self._estimate(X)
        self.hankel_params_ = params
        self.estimate_ = est
        self.delays_ = np.asarray(est.delays)
        self.toa_ = est.toa
        return self

    def transform(self, X):
        """Sorted delays for each acquisition, shape ``(n_acquisitions, K)``."""
        X = check_estimate_sets(X, min_bands=self._min_bands)
        return np.stack([np.asarray(self._estimate(x)[1].delays) for x in X])

    def predict(self, X):
        """TOA (smallest delay) of each acquisition."""
        return self.transform(X).min(axis=1)

    def score(self, X, y):
        """Negative RMSE of the predicted TOAs against ``y``."""
        y = np.asarray(y, dtype=float).reshape(-1)
        err = self.predict(X) - y
        return -float(np.sqrt(np.mean(err ** 2)))

    def _hankel(self, X):
        return HankelParams.for_length(X.n_samples, self.n_paths, self.n_rows)


class SingleBandESPRIT(_DelayEstimatorMixin, BaseEstimator):
    """Least-squares ESPRIT on the first band of each acquisition.

    Parameters
    ----------
    n_paths : int
        Model order ``K`` (assumed known).
    n_rows : int, optional
        Hankel row count ``P``; near square by default.
    shift : int
        Selection shift ``r``.
    """

    _min_bands = 1

    def __init__(self, n_paths=1, n_rows=None, shift=1):
        self.n_paths = n_paths
        self.n_rows = n_rows
        self.shift = shift

    def _estimate(self, X):
        params = self._hankel(X)
        band, h = X.bands[0]
        return params, single_band_esprit(h, params, X.delta_omega, self.shift,
                                          center=band.center)


class MultibandESPRIT(_DelayEstimatorMixin, BaseEstimator):
    """Multiresolution ESPRIT over two or more bands.

    Parameters
    ----------
    n_paths : int
        Model order ``K`` (assumed known).
    n_rows : int, optional
        Hankel row count ``P``; near square by default.
    mode : {"fine", "weighted"}
        Use the unwrapped fine delays, or their aperture-weighted average with
        the coarse delays.
    """

    _min_bands = 2

    def __init__(self, n_paths=1, n_rows=None, mode="fine"):
        self.n_paths = n_paths
        self.n_rows = n_rows
        self.mode = mode

    def fit(self, X, y=None):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        return super().fit(X, y)

    def _estimate(self, X):
        params = self._hankel(X)
        return params, estimate_multiband(X, self.n_paths, params, self.mode)


def fitted_toa(estimator):
    """TOA of a fitted estimator (raises ``NotFittedError`` otherwise)."""
    check_is_fitted(estimator, "toa_")
    return estimator.toa_
