"""Single-band and multiresolution multiband ESPRIT delay estimation.

Phase convention: model phasors are ``exp(-j phi)``; estimated phases are
``wrap(-arg(lambda))`` in ``[0, 2*pi)``.

Within a band the DFT bin spacing ``omega_t`` gives coarse but unambiguous
phases ``phi_k = omega_t * tau_k``. Between two bands the carrier offset
gives fine, wrapped phases ``theta_k = (w2 - w1) * tau_k mod 2*pi``. The
integer cycle count is resolved with the coarse delay.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .._validation import check_matrix, check_positive_int, check_vector
from ..channel import TWO_PI
from ..exceptions import CycleSlipError, DegenerateGeometryError, ValidationError
from .subspace import MAX_CONDITION, HankelParams, build_hankel, checked_pinv, signal_subspace

MODES = ("fine", "weighted")

#: Minimum distance (cycles) of the rounding argument from a half-integer.
CYCLE_MARGIN = 0.25

_TIE_TOL = 1e-15


def wrap_phase(x):
    """Wrap angles into ``[0, 2*pi)``."""
    out = np.mod(x, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


def _readonly(a):
    if a is None:
        return None
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DelayEstimate:
    """Per-path delay estimate.

    Attributes
    ----------
    delays : ndarray
        Final delays ``tau_k`` in seconds, ascending.
    coarse_phases : ndarray
        Intra-band phases ``phi_k`` in ``[0, 2*pi)``.
    omega_t : float
        DFT bin spacing used for the coarse phases.
    fine_phases, cycles, cycle_residuals : ndarray or None
        Inter-band phase ``theta_k``, integer cycle count ``n_k`` and the
        distance of the rounding argument from ``n_k``. Multiband only.
    aperture : float or None
        Carrier-frequency offset ``w2 - w1`` of the fine phases (rad/s).
    flagged : ndarray of bool
        Paths whose cycle rounding had less than the required margin or
        whose delay was clamped into ``[0, T)``.
    gains : ndarray or None
        Least-squares path amplitudes for the estimated delays.
    """

    delays: np.ndarray
    coarse_phases: np.ndarray
    omega_t: float
    fine_phases: np.ndarray = None
    cycles: np.ndarray = None
    cycle_residuals: np.ndarray = None
    aperture: float = None
    flagged: np.ndarray = None
    gains: np.ndarray = None

    def __post_init__(self):
        k = np.asarray(self.delays).shape[0]
        if self.flagged is None:
            object.__setattr__(self, "flagged", np.zeros(k, dtype=bool))
        for name in ("delays", "coarse_phases", "fine_phases", "cycles",
                     "cycle_residuals", "flagged", "gains"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def n_paths(self):
        return self.delays.shape[0]

    @property
    def toa_index(self):
        return int(np.argmin(self.delays))

    @property
    def toa(self):
        """Smallest estimated delay, i.e. the line-of-sight TOA."""
        return float(self.delays[self.toa_index])

    @property
    def coarse_delays(self):
        return self.coarse_phases / self.omega_t

    @property
    def fine_delays(self):
        if self.fine_phases is None:
            return None
        return (self.fine_phases + TWO_PI * self.cycles) / self.aperture

    @property
    def margins(self):
        """Distance of each rounding argument from the nearest half-integer."""
        if self.cycle_residuals is None:
            return None
        return 0.5 - np.abs(self.cycle_residuals)

    def reordered(self, order):
        fields = {}
        for name in ("delays", "coarse_phases", "fine_phases", "cycles",
                     "cycle_residuals", "flagged", "gains"):
            value = getattr(self, name)
            fields[name] = None if value is None else value[order]
        return DelayEstimate(omega_t=self.omega_t, aperture=self.aperture, **fields)


def _fit_gains(vectors, centers, omega_t, delays):
    n = np.arange(vectors.shape[1])
    blocks = [np.exp(-1j * np.outer(c + n * omega_t, delays)) for c in centers]
    B = np.vstack(blocks)
    return np.linalg.lstsq(B, vectors.reshape(-1), rcond=None)[0]


def _sorted(est):
    gains = np.zeros(est.n_paths) if est.gains is None else np.abs(est.gains)
    keys = np.round(est.delays / _TIE_TOL)
    return est.reordered(np.lexsort((-gains, keys)))


def single_band_esprit(h, params, omega_t, shift=1, *, center=0.0):
    """Delays from one band via least-squares ESPRIT.

    Parameters
    ----------
    h : array_like of complex, shape (N,)
        Deconvolved channel vector.
    params : HankelParams
    omega_t : float
        DFT bin spacing ``2*pi/T`` (rad/s).
    shift : int
        Row shift ``r`` of the selection matrices. ``r > 1`` estimates
        ``Phi**r`` and is only unambiguous for delays below ``T / r``.
    center : float
        Band center, only used to fit the returned path gains.

    Returns
    -------
    DelayEstimate
        Coarse-only estimate with ``delays = wrap(-arg(lambda)) / (r*omega_t)``.
    """
    h = check_vector(h, "h")
    shift = check_positive_int(shift, "shift")
    if params.P - shift <= params.K:
        raise ValidationError(f"need P - r > K, got P={params.P}, r={shift}, K={params.K}")
    U = signal_subspace(build_hankel(h, params), params.K)
    psi = checked_pinv(U[:-shift], "U_1") @ U[shift:]
    lam = np.linalg.eigvals(psi)
    phases = wrap_phase(-np.angle(lam)) / shift
    delays = phases / omega_t
    gains = _fit_gains(h[None, :], [center], omega_t, delays)
    return _sorted(DelayEstimate(delays, phases, float(omega_t), gains=gains))


def stack_two_band(h1, h2, params):
    """Stack the Hankel matrices of two bands vertically (``2P x (Q+1)``)."""
    h1 = check_vector(h1, "h1")
    h2 = check_vector(h2, "h2")
    if h1.shape != h2.shape:
        raise ValidationError(f"band vectors differ in length: {h1.shape[0]} vs {h2.shape[0]}")
    return np.vstack([build_hankel(h1, params), build_hankel(h2, params)])


def _shift_rows(P, r):
    """Row indices of the first and second shift selections over two blocks."""
    first = np.arange(P - r)
    return (np.concatenate([first, P + first]),
            np.concatenate([first + r, P + first + r]))


def solve_invariances(U, P, r=1):
    """Least-squares solutions of the two invariance equations.

    Returns ``(Psi, Upsilon)`` where ``Psi`` relates the row shift by ``r``
    within each block (intra-band) and ``Upsilon`` relates block 2 to block 1
    (inter-band).
    """
    U = check_matrix(U, "U")
    P = check_positive_int(P, "P")
    r = check_positive_int(r, "r")
    K = U.shape[1]
    if U.shape[0] != 2 * P:
        raise ValidationError(f"U must have 2P = {2 * P} rows, got {U.shape[0]}")
    if P - r < K:
        raise ValidationError(f"each shifted block needs at least K={K} rows, got {P - r}")
    sel1, sel2 = _shift_rows(P, r)
    psi = checked_pinv(U[sel1], "U_Phi1") @ U[sel2]
    upsilon = checked_pinv(U[:P], "U_Theta1") @ U[P:]
    return psi, upsilon


def joint_diagonalize(psi, upsilon):
    """Pair intra- and inter-band phases through the eigenvectors of ``Psi``.

    ``Psi`` is eigendecomposed as ``T diag(lambda) T^-1``, and the fine phases
    are read from the diagonal of ``T^-1 Upsilon T``. Each coarse phase is
    therefore paired with the fine phase of the same path.

    Returns
    -------
    ndarray, shape (K, 2)
        Rows ``(phi_k, theta_k)`` sorted by ``phi_k``.
    """
    psi = check_matrix(psi, "Psi", square=True)
    upsilon = check_matrix(upsilon, "Upsilon", square=True)
    if psi.shape != upsilon.shape:
        raise ValidationError(f"Psi {psi.shape} and Upsilon {upsilon.shape} differ in size")
    lam, T = np.linalg.eig(psi)
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        gaps = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(lam.size, np.inf))
        raise DegenerateGeometryError(
            f"Psi is (nearly) defective: eigenvector condition number {cond:.3g}, "
            f"closest eigenvalue pair {gaps.min():.3g} apart"
        )
    d = np.diag(np.linalg.solve(T, upsilon @ T))
    pairs = np.column_stack([wrap_phase(-np.angle(lam)), wrap_phase(-np.angle(d))])
    return pairs[np.argsort(pairs[:, 0], kind="stable")]


def _resolve_cycles(reference, ref_aperture, theta, aperture, mode, duration):
    x = (aperture * reference - theta) / TWO_PI
    cycles = np.round(x)
    residual = x - cycles
    delays = (theta + TWO_PI * cycles) / aperture
    if mode == "weighted":
        w_ref, w_fine = ref_aperture ** 2, aperture ** 2
        delays = (w_ref * reference + w_fine * delays) / (w_ref + w_fine)
    flagged = np.abs(residual) > 0.5 - CYCLE_MARGIN
    clamped = np.clip(delays, 0.0, np.nextafter(duration, 0.0))
    flagged |= clamped != delays
    return clamped, cycles.astype(int), residual, flagged


def _check_mode(mode):
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; expected one of {MODES}")


def unwrap_and_combine(pairs, omega_t, omega_1, omega_2, mode="fine"):
    """Resolve cycle counts and form final delays.

    ``n_k = round((omega_2 - omega_1) / omega_t * phi_k - theta_k) / (2*pi))``
    and ``tau_k = (theta_k + 2*pi*n_k) / (omega_2 - omega_1)``. With
    ``mode="weighted"`` the coarse and fine delays are averaged with weights
    ``omega_t**2`` and ``(omega_2 - omega_1)**2``.

    Delays outside ``[0, 2*pi/omega_t)`` are clamped and flagged; so are paths
    whose rounding argument lies within 0.25 cycles of a half-integer.
    """
    _check_mode(mode)
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if omega_2 <= omega_1:
        raise ValidationError("need omega_2 > omega_1")
    phi, theta = pairs[:, 0], pairs[:, 1]
    aperture = float(omega_2 - omega_1)
    delays, cycles, residual, flagged = _resolve_cycles(
        phi / omega_t, omega_t, theta, aperture, mode, TWO_PI / omega_t)
    return _sorted(DelayEstimate(delays, phi, float(omega_t), theta, cycles, residual,
                                 aperture, flagged))


def _pair_phases(h1, h2, params):
    U = signal_subspace(stack_two_band(h1, h2, params), params.K)
    return joint_diagonalize(*solve_invariances(U, params.P))


def estimate_multiband(est, K, params=None, mode="fine"):
    """Multiresolution delay estimate from a :class:`ChannelEstimateSet`.

    Two bands use the coarse phases of the stacked subspace as the unwrapping
    reference. With more bands the pairs ``(1, 2), (1, 3), ..., (1, L)`` are
    processed in turn, each step unwrapping against the delays of the
    previous one; an intermediate step with insufficient rounding margin
    raises :class:`CycleSlipError`.
    """
    _check_mode(mode)
    if est.n_bands < 2:
        raise ValidationError("multiband estimation needs at least two bands")
    if params is None:
        params = HankelParams.for_length(est.n_samples, K)
    elif params.K != K:
        raise ValidationError(f"params.K={params.K} does not match K={K}")

    omega_t = est.delta_omega
    duration = est.duration
    centers = est.centers
    h = est.vectors

    reference, ref_aperture, phi, coarse_ref = None, omega_t, None, None
    for j in range(1, est.n_bands):
        pairs = _pair_phases(h[0], h[j], params)
        aperture = float(centers[j] - centers[0])
        if reference is None:
            phi = pairs[:, 0]
            ref = phi / omega_t
        else:
            # Match this step's paths to the previous step's through the coarse phases.
            cost = np.abs(pairs[:, 0][:, None] / omega_t - coarse_ref[None, :])
            rows, cols = linear_sum_assignment(cost)
            pairs = pairs[rows[np.argsort(cols)]]
            phi = pairs[:, 0]
            ref = reference
        delays, cycles, residual, flagged = _resolve_cycles(
            ref, ref_aperture, pairs[:, 1], aperture,
            mode if j == est.n_bands - 1 else "fine", duration)
        if j < est.n_bands - 1 and np.any(flagged):
            k = int(np.argmax(np.abs(residual)))
            raise CycleSlipError(
                f"ladder step (1, {j + 1}): cycle rounding margin "
                f"{0.5 - abs(residual[k]):.3f} < {CYCLE_MARGIN} on path {k}"
            )
        reference, ref_aperture, coarse_ref = delays, aperture, phi / omega_t

    gains = _fit_gains(h, centers, omega_t, delays)
    return _sorted(DelayEstimate(delays, phi, float(omega_t), pairs[:, 1], cycles, residual,
                                 aperture, flagged, gains))
