"""Least-squares conditional expectations on monomial features."""
import itertools

import numpy as np

from . import _kernels
from .errors import NumericError, PreconditionError


def monomial_exponents(d, degree):
    """All exponent vectors of total degree <= ``degree`` in ``d`` variables, graded order."""
    rows = [e for total in range(degree + 1)
            for e in itertools.product(range(total + 1), repeat=d) if sum(e) == total]
    return np.array(rows, dtype=np.int64).reshape(-1, d)


def basis_size(d, degree):
    return monomial_exponents(d, degree).shape[0]


def features(x, degree):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return _kernels.monomials(x, monomial_exponents(x.shape[1], degree))


def regress_conditional(x, targets, degree, check_size=True):
    """Fit ``targets`` on monomials of ``x`` up to total ``degree``.

    ``targets`` may be ``[M]`` or ``[M, K]`` (several right-hand sides share one
    factorisation).  Rank-deficient designs are solved in the minimum-norm
    sense.  Returns ``(coeffs, fitted)``.
    """
    phi = features(x, degree)
    targets = np.asarray(targets, dtype=float)
    M, P = phi.shape
    if check_size and M < 10 * P:
        raise PreconditionError(f"{M} samples are too few for {P} basis functions (need {10 * P})")
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(targets))):
        raise NumericError("non-finite regression input")
    # column scaling keeps the design well conditioned for large |x|
    scale = np.sqrt(np.mean(phi * phi, axis=0))
    scale[scale == 0] = 1.0
    try:
        coeffs, *_ = np.linalg.lstsq(phi / scale, targets, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"least squares failed: {exc}") from exc
    coeffs = coeffs / (scale if coeffs.ndim == 1 else scale[:, None])
    return coeffs, phi @ coeffs

