"""Conditional Cramer-Rao lower bound on the path delays.

The per-band model ``h_i = B_i a + n_i`` with ``B_i[n, k] = exp(-j (w_i + n w_t) tau_k)``
is stacked over all bands into one tall model sharing the gains ``a``. The
bound is

    CRLB(tau) = sigma^2 / 2 * inv(Re[(D^H P_B^perp D) * R_a^T])

with ``D`` the stacked derivative columns ``d b(tau_k) / d tau_k`` and
``P_B^perp = I - B (B^H B)^-1 B^H``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_bands, check_positive_int, check_positive_real
from .channel import dft_frequencies
from .exceptions import RankDeficiencyError, ValidationError

_SINGULAR_RCOND = 1e-14


@dataclass(frozen=True)
class CrlbInput:
    """Everything the bound depends on.

    ``gain_covariance`` defaults to ``a a^H`` for the channel's deterministic
    gains. ``noise_variance`` is the per-bin variance of the deconvolved
    channel vectors.
    """

    channel: object
    bands: tuple
    n_samples: int
    duration: float
    noise_variance: float
    gain_covariance: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "bands", check_bands(self.bands))
        check_positive_int(self.n_samples, "n_samples")
        check_positive_real(self.duration, "duration")
        check_positive_real(self.noise_variance, "noise_variance")
        K = self.channel.n_paths
        if self.gain_covariance is None:
            a = self.channel.gains.astype(complex)
            R = np.outer(a, a.conj())
        else:
            R = np.asarray(self.gain_covariance, dtype=complex)
            if R.shape != (K, K):
                raise ValidationError(f"gain_covariance must be {K}x{K}, got {R.shape}")
            if not np.allclose(R, R.conj().T, rtol=1e-12, atol=1e-14 * np.abs(R).max()):
                raise ValidationError("gain_covariance must be Hermitian")
            if np.linalg.eigvalsh(R).min() < -1e-12 * np.abs(R).max():
                raise ValidationError("gain_covariance must be positive semidefinite")
        object.__setattr__(self, "gain_covariance", R)

    def with_noise_variance(self, noise_variance):
        return CrlbInput(self.channel, self.bands, self.n_samples, self.duration,
                         noise_variance, self.gain_covariance)

    @property
    def frequencies(self):
        """Stacked RF probing frequencies of all bands (rad/s)."""
        return np.concatenate([dft_frequencies(b, self.n_samples, self.duration)
                               for b in self.bands])


def steering_matrix(inp, delays=None):
    """Stacked model matrix ``B`` (``L*N x K``) without the gains."""
    delays = inp.channel.delays if delays is None else np.asarray(delays, dtype=float)
    return np.exp(-1j * np.outer(inp.frequencies, delays))


def orthogonal_projector(B):
    """``I - B (B^H B)^-1 B^H``."""
    gram = B.conj().T @ B
    if np.linalg.cond(gram) > 1 / _SINGULAR_RCOND:
        raise RankDeficiencyError("model matrix B is not full column rank")
    return np.eye(B.shape[0]) - B @ np.linalg.solve(gram, B.conj().T)


def fisher_information(inp):
    """Analytic Fisher information of the delays, gains concentrated out."""
    B = steering_matrix(inp)
    D = -1j * inp.frequencies[:, None] * B
    inner = D.conj().T @ orthogonal_projector(B) @ D
    return (2.0 / inp.noise_variance) * np.real(inner * inp.gain_covariance.T)


def crlb_matrix(inp):
    F = fisher_information(inp)
    try:
        cond = np.linalg.cond(F)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1 / _SINGULAR_RCOND:
        raise RankDeficiencyError(
            f"delay Fisher information is singular (condition number {cond:.3g})"
        )
    return np.linalg.inv(F)


def crlb_delays(inp):
    """Variance lower bounds (s^2) of each delay, in channel path order."""
    return np.diag(crlb_matrix(inp)).copy()


def _mean_vector(inp, delays, gains):
    return steering_matrix(inp, delays) @ gains


def numerical_fim(inp, step=1e-13):
    """Delay Fisher information from finite differences of the mean vector.

    Derivatives of the noiseless stacked mean with respect to the delays and
    the real and imaginary parts of the gains are taken by a fourth-order
    central difference, then the gains are eliminated by a Schur complement.
    Only deterministic gains (the default covariance) are supported.
    """
    step = check_positive_real(step, "step")
    tau = inp.channel.delays
    a = inp.channel.gains.astype(complex)
    K = tau.size
    theta = np.concatenate([tau, a.real, a.imag])
    scales = np.concatenate([np.full(K, step), np.full(2 * K, 1e-6 * max(np.abs(a).max(), 1))])

    def mean(t):
        return _mean_vector(inp, t[:K], t[K:2 * K] + 1j * t[2 * K:])

    J = np.empty((inp.frequencies.size, 3 * K), dtype=complex)
    for i in range(3 * K):
        e = np.zeros(3 * K)
        e[i] = scales[i]
        J[:, i] = (8 * (mean(theta + e) - mean(theta - e))
                   - (mean(theta + 2 * e) - mean(theta - 2 * e))) / (12 * scales[i])
    F = (2.0 / inp.noise_variance) * np.real(J.conj().T @ J)
    F_tt, F_ta, F_aa = F[:K, :K], F[:K, K:], F[K:, K:]
    eff = F_tt - F_ta @ np.linalg.solve(F_aa, F_ta.T)
    return 0.5 * (eff + eff.T)


def check_numerical_fim(inp, step=1e-13, rtol=1e-6):
    """Compare the analytic bound with the finite-difference one.

    Returns the largest relative deviation of the bound diagonal; raises
    ``ValueError`` with a diagnostic when it exceeds ``rtol`` (typically
    because ``step`` is too large).
    """
    analytic = crlb_delays(inp)
    numeric = np.diag(np.linalg.inv(numerical_fim(inp, step)))
    dev = float(np.max(np.abs(numeric - analytic) / analytic))
    if dev > rtol:
        raise ValueError(
            f"numerical FIM (step={step:g} s) deviates from the analytic bound by "
            f"{dev:.3g} > {rtol:g}; try a smaller step"
        )
    return dev


def crlb_toa_rmse(inp):
    """Square root of the bound on the earliest path's delay (s)."""
    return float(np.sqrt(crlb_delays(inp)[int(np.argmin(inp.channel.delays))]))


__all__ = [
    "CrlbInput",
    "check_numerical_fim",
    "crlb_delays",
    "crlb_toa_rmse",
    "crlb_matrix",
    "fisher_information",
    "numerical_fim",
    "orthogonal_projector",
    "steering_matrix",
]
