"""Hankel embedding, truncated-SVD signal subspace and helpers."""

from dataclasses import dataclass

import numpy as np

from .._validation import check_matrix, check_positive_int, check_vector
from ..exceptions import DegenerateGeometryError, ValidationError

#: Relative singular-value cutoff used by every pseudo-inverse.
PINV_RCOND = 1e-12
#: Condition number above which a selection submatrix counts as rank deficient.
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class HankelParams:
    """Hankel embedding sizes.

    The matrix has ``P`` rows and ``Q + 1`` columns and is built from a vector
    of length ``N = P + Q + 1``; entry ``(p, q)`` is ``h[p + q]``. ``K`` is the
    model order and must satisfy ``P > K`` and ``Q >= K``.
    """

    P: int
    Q: int
    K: int

    def __post_init__(self):
        check_positive_int(self.P, "P")
        check_positive_int(self.Q, "Q")
        check_positive_int(self.K, "K")
        if self.P <= self.K:
            raise ValidationError(f"need P > K, got P={self.P}, K={self.K}")
        if self.Q < self.K:
            raise ValidationError(f"need Q >= K, got Q={self.Q}, K={self.K}")

    @property
    def N(self):
        return self.P + self.Q + 1

    @classmethod
    def for_length(cls, n_samples, n_paths, n_rows=None):
        """Sizes for a length-``n_samples`` vector.

        By default the matrix is near square: ``Q + 1 = ceil(N / 2)``.
        ``n_rows`` overrides ``P``.
        """
        n_samples = check_positive_int(n_samples, "n_samples")
        if n_rows is None:
            q = -(-n_samples // 2) - 1
        else:
            q = n_samples - check_positive_int(n_rows, "n_rows") - 1
        return cls(n_samples - q - 1, q, n_paths)


def build_hankel(h, params):
    """Return the ``P x (Q+1)`` Hankel matrix with entries ``h[p + q]``."""
    h = check_vector(h, "h")
    if h.shape[0] != params.N:
        raise ValidationError(
            f"vector length {h.shape[0]} does not match P + Q + 1 = {params.N}"
        )
    idx = np.arange(params.P)[:, None] + np.arange(params.Q + 1)[None, :]
    return h[idx]


def signal_subspace(H, K):
    """Orthonormal basis of the ``K`` dominant left singular vectors of ``H``."""
    H = check_matrix(H, "H")
    K = check_positive_int(K, "K")
    if K > min(H.shape):
        raise ValidationError(f"K={K} exceeds the smallest dimension of a {H.shape} matrix")
    U = np.linalg.svd(H, full_matrices=False)[0]
    return U[:, :K]


def checked_pinv(A, name="selection submatrix"):
    """Pseudo-inverse via SVD, refusing rank-deficient input.

    Raises
    ------
    DegenerateGeometryError
        If the condition number of ``A`` exceeds ``MAX_CONDITION``.
    """
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[-1] <= s[0] / MAX_CONDITION:
        cond = np.inf if s.size == 0 or s[-1] == 0 else s[0] / s[-1]
        raise DegenerateGeometryError(
            f"{name} of shape {A.shape} is rank deficient (condition number {cond:.3g})"
        )
    keep = s > PINV_RCOND * s[0]
    return (Vh[keep].conj().T / s[keep]) @ U[:, keep].conj().T


def order_from_gap(singular_values, max_order=None):
    """Model order at the largest ratio between consecutive singular values.

    Auxiliary helper; the estimators never call it implicitly.
    """
    s = np.asarray(singular_values, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise ValidationError("need at least two singular values")
    if max_order is None:
        max_order = s.size - 1
    s = s[: max_order + 1]
    tiny = np.finfo(float).tiny
    ratios = s[:-1] / np.maximum(s[1:], tiny)
    return int(np.argmax(ratios)) + 1
