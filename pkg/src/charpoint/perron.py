"""Largest real eigenvalue of a nonnegative matrix, with certified bounds.

Dimensions here are tiny (the Jacobians of m-equation systems, m <= ~10), so
the solver favors robustness: shifted power iteration for irreducible
matrices, an exact characteristic-polynomial root otherwise.  The
Collatz-Wielandt quotient provides a certified lower bound used both inside
the iteration and as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REL_TOL = 1e-12
MAX_ITER = 100_000


class PerronError(ValueError):
    pass


@dataclass
class PerronResult:
    """Largest real eigenvalue with normalized positive left/right vectors.

    ``simple`` is True when the matrix is irreducible, in which case the root
    is a simple root of the characteristic polynomial with positive
    eigenvectors.  ``residual`` bounds ||M v - lam v||_inf.
    """

    lam: float
    right_vector: np.ndarray
    left_vector: np.ndarray
    residual: float
    simple: bool


def _check_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise PerronError("matrix must be square")
    if not np.all(np.isfinite(M)):
        raise PerronError("matrix entries must be finite")
    if np.any(M < 0):
        raise PerronError("matrix entries must be nonnegative")
    if not M.any():
        raise PerronError("matrix must be nonzero")
    return M


def _irreducible(M: np.ndarray) -> bool:
    k = M.shape[0]
    if k == 1:
        return M[0, 0] > 0
    reach = (M > 0).astype(bool) | np.eye(k, dtype=bool)
    # boolean closure by repeated squaring
    for _ in range(int(math.ceil(math.log2(k))) + 1):
        reach = reach @ reach
    return bool(reach.all())


def char_poly_coefficients(M: np.ndarray) -> np.ndarray:
    """Coefficients of det(lambda I - M) by Faddeev-LeVerrier (highest first)."""
    M = np.asarray(M, dtype=float)
    k = M.shape[0]
    coeffs = np.zeros(k + 1)
    coeffs[0] = 1.0
    N = np.zeros_like(M)
    for i in range(1, k + 1):
        N = M @ N + coeffs[i - 1] * np.eye(k)
        coeffs[i] = -(M @ N).trace() / i
    return coeffs


def largest_real_root(coeffs: np.ndarray) -> float:
    """Largest real root of a real polynomial given highest-degree-first coefficients."""
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) < 1e-8 * (1.0 + np.abs(roots.real))].real
    if real.size == 0:
        raise PerronError("no real root found")
    return float(real.max())


def _char_poly_route(M: np.ndarray) -> PerronResult:
    lam = largest_real_root(char_poly_coefficients(M))
    k = M.shape[0]
    # least-squares null vectors of (M - lam I); may have zero entries for
    # reducible matrices, which is faithful to the theory
    def null_vec(A):
        _, _, vh = np.linalg.svd(A)
        v = vh[-1].real
        if v.sum() < 0:
            v = -v
        v = np.clip(v, 0.0, None)
        s = v.sum()
        return v / s if s > 0 else np.full(k, 1.0 / k)

    right = null_vec(M - lam * np.eye(k))
    left = null_vec(M.T - lam * np.eye(k))
    residual = float(np.max(np.abs(M @ right - lam * right)))
    return PerronResult(lam=lam, right_vector=right, left_vector=left,
                        residual=residual, simple=False)


def _power_iterate(M: np.ndarray) -> tuple[float, np.ndarray]:
    """Power iteration on the primitive shift M + cI; returns (lam, v)."""
    k = M.shape[0]
    c = 1.0 + float(M.diagonal().max())
    S = M + c * np.eye(k)
    v = np.full(k, 1.0 / k)
    for it in range(MAX_ITER):
        w = S @ v
        quot = w / v
        lo, hi = float(quot.min()), float(quot.max())
        if hi - lo <= REL_TOL * hi:
            lam = 0.5 * (lo + hi)
            return lam - c, w / w.sum()
        v = w / w.sum()
    raise PerronError(f"power iteration did not converge in {MAX_ITER} steps")


def lambda_max(M) -> PerronResult:
    """Perron root Lambda(M) of a nonnegative nonzero matrix, to 1e-12 relative.

    Irreducible matrices go through shifted power iteration (the shift makes
    the matrix primitive, so the iteration converges to the Perron pair);
    reducible ones fall back to the characteristic-polynomial largest real
    root, where the eigenvector may sit on the boundary of the cone.
    """
    M = _check_matrix(M)
    if not _irreducible(M):
        return _char_poly_route(M)
    lam, right = _power_iterate(M)
    _, left = _power_iterate(M.T)
    residual = float(np.max(np.abs(M @ right - lam * right)))
    return PerronResult(lam=lam, right_vector=right, left_vector=left,
                        residual=residual, simple=True)


def collatz_wielandt_check(M, x) -> float:
    """min_i (Mx)_i / x_i for positive x: a certified lower bound for Lambda(M)."""
    M = _check_matrix(M)
    x = np.asarray(x, dtype=float)
    if x.shape != (M.shape[0],):
        raise PerronError("test vector has wrong length")
    if np.any(x <= 0):
        raise PerronError("test vector must be positive")
    return float((M @ x / x).min())
