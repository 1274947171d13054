from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr


@dataclass(frozen=True)
class DirectionFrame:
    """``l`` orthonormal probe directions in ``R^d``, stored as a (d, l) array."""

    columns: np.ndarray

    @property
    def d(self):
        return self.columns.shape[0]

    @property
    def l(self):
        return self.columns.shape[1]

    def __iter__(self):
        return iter(self.columns.T)


def sample_direction_frame(d, l, rng):
    """First ``l`` columns of a Haar-distributed orthogonal ``d x d`` matrix.

    Orthonormalizes a Gaussian ``(d, l)`` matrix by QR and flips column signs
    so that R has a positive diagonal, which makes the result exactly Haar
    distributed without ever forming the full ``d x d`` matrix.
    """
    if not 1 <= l <= d:
        raise ValueError(f"need 1 <= l <= d, got l={l}, d={d}")
    # (l, d) then transpose: Fortran order lets LAPACK work in place
    z = rng.standard_normal((l, d)).T
    q, r = qr(z, mode="economic", overwrite_a=True, check_finite=False)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return DirectionFrame(q * signs)
