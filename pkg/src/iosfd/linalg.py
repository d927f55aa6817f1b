"""Small complex linear-algebra helpers used throughout the solvers.

Everything funnels Hermitian positive-(semi)definite work through Cholesky
factorizations; explicit inverses are never formed.
"""
from __future__ import annotations

import logging

import numpy as np

from .errors import NumericalError

logger = logging.getLogger(__name__)

# Relative ridge used as a last resort when a factorization fails.
_RIDGE_SCALE = 1e-12


def cn_sample(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian draw.

    The real part is drawn first, then the imaginary part, each filled
    row-major; this fixes the stream order so a given seed always yields
    the same matrices.
    """
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def hermitize(m: np.ndarray) -> np.ndarray:
    """Symmetrize away roundoff so Cholesky sees an exactly Hermitian matrix."""
    return 0.5 * (m + m.conj().T)


def _ridge_for(a: np.ndarray) -> float:
    n = a.shape[0]
    tr = float(np.trace(a).real)
    return _RIDGE_SCALE * max(tr, 1.0) / n


def chol_pd(a: np.ndarray) -> np.ndarray:
    """Cholesky factor of a Hermitian PD matrix, with a logged tiny-ridge retry."""
    a = hermitize(a)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        ridge = _ridge_for(a)
        logger.warning("cholesky failed; retrying with ridge %.3e", ridge)
        try:
            return np.linalg.cholesky(a + ridge * np.eye(a.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("matrix not positive definite even after ridge") from exc


def logdet_pd(a: np.ndarray) -> float:
    """log|A| for Hermitian PD A via the Cholesky factor."""
    c = chol_pd(a)
    return 2.0 * float(np.sum(np.log(np.diag(c).real)))


def solve_pd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for Hermitian PD A through its Cholesky factor."""
    c = chol_pd(a)
    y = np.linalg.solve(c, b)
    return np.linalg.solve(c.conj().T, y)


def solve_psd_lstsq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm solve for Hermitian PSD A (used for zero-multiplier probes)."""
    sol, *_ = np.linalg.lstsq(hermitize(a), b, rcond=None)
    return sol


def inv_pd(a: np.ndarray) -> np.ndarray:
    return solve_pd(a, np.eye(a.shape[0], dtype=complex))


def min_eigval(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(a))[0])


def max_eigval(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(a))[-1])


def assert_finite(*arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr.view(float) if np.iscomplexobj(arr) else arr)):
            raise NumericalError("non-finite values encountered")
