# sources/orthogonal.py

import numpy as np


def haar_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """
    Random orthogonal matrix distributed uniformly (Haar) over O(d).

    Householder QR (LAPACK geqrf behind np.linalg.qr) of a standard Gaussian
    matrix, with the signs of diag(R) folded into Q so the result does not
    inherit the sign convention of the factorization.

    Parameters
    ----------
    d : int
        Positive dimension.
    rng : np.random.Generator
        Source of the Gaussian matrix.

    Returns
    -------
    np.ndarray, shape (d, d)
        Q with Q^T Q = I up to rounding.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    gaussian = rng.standard_normal((d, d))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs[None, :]
