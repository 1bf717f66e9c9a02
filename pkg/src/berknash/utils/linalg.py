"""
Dense linear-algebra kernels with explicit numerical contracts.

All routines are pure functions of their inputs. Matrices and vectors are
plain float64 numpy arrays; the helpers below validate shape and finiteness
once at the boundary so callers can rely on them afterwards.
"""

import logging
import warnings
from typing import Tuple

import numpy as np
import scipy.linalg
from scipy.linalg import LinAlgError, LinAlgWarning

from ..errors import InvalidParams, NoConvergence, SingularMatrix

logger = logging.getLogger(__name__)

Matrix = np.ndarray
Vector = np.ndarray

PIVOT_RTOL = 1e-12
RESIDUAL_RTOL = 1e-10
MAX_REFINEMENTS = 2


def as_matrix(a, name: str = "matrix") -> Matrix:
    """Convert to a finite 2-D float64 array or raise InvalidParams."""
    arr = np.array(a, dtype=float)
    if arr.ndim != 2:
        raise InvalidParams(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams(f"{name} contains non-finite entries")
    return arr


def as_vector(v, name: str = "vector") -> Vector:
    """Convert to a finite 1-D float64 array or raise InvalidParams."""
    arr = np.array(v, dtype=float)
    if arr.ndim != 1:
        raise InvalidParams(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams(f"{name} contains non-finite entries")
    return arr


def _require_square(a: Matrix, name: str) -> int:
    if a.shape[0] != a.shape[1]:
        raise InvalidParams(f"{name} must be square, got shape {a.shape}")
    return a.shape[0]


def _factorize(a: Matrix) -> Tuple[np.ndarray, np.ndarray]:
    """LU with partial pivoting; rejects pivots below PIVOT_RTOL * ||A||_inf."""
    scale = scipy.linalg.norm(a, np.inf) if a.size else 0.0
    with warnings.catch_warnings():
        # exact-zero pivots are reported through SingularMatrix below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.size and pivots.min() <= PIVOT_RTOL * scale:
        raise SingularMatrix(
            "matrix is singular to working precision",
            details={"min_pivot": float(pivots.min()), "norm_inf": float(scale)},
        )
    return lu, piv


def solve_linear(a, b) -> np.ndarray:
    """
    Solve A x = b for square A.

    The right-hand side may be a vector or a matrix of stacked columns. Up to
    two rounds of iterative refinement are applied when the relative residual
    ||Ax - b|| / max(1, ||b||) exceeds 1e-10.

    Raises:
        SingularMatrix: if a pivot falls below 1e-12 * ||A||_inf.
    """
    a = as_matrix(a, "A")
    n = _require_square(a, "A")
    b = np.array(b, dtype=float)
    if b.shape[0] != n:
        raise InvalidParams(f"right-hand side has length {b.shape[0]}, expected {n}")
    if n == 0:
        return b.copy()

    lu, piv = _factorize(a)
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    bound = RESIDUAL_RTOL * max(1.0, float(scipy.linalg.norm(b)))
    for _ in range(MAX_REFINEMENTS):
        residual = b - a @ x
        if scipy.linalg.norm(residual) <= bound:
            break
        x = x + scipy.linalg.lu_solve((lu, piv), residual, check_finite=False)
    else:
        residual = b - a @ x
        if scipy.linalg.norm(residual) > bound:
            logger.warning(
                f"Residual {scipy.linalg.norm(residual):.3e} above contract {bound:.3e} after refinement"
            )
    return x


def inverse(a) -> Matrix:
    """Explicit inverse through the same pivot-checked factorization."""
    a = as_matrix(a, "A")
    n = _require_square(a, "A")
    return solve_linear(a, np.eye(n))


def relative_residual(a: Matrix, x: np.ndarray, b: np.ndarray) -> float:
    """||Ax - b||_2 / max(1, ||b||_2)."""
    return float(scipy.linalg.norm(a @ x - b) / max(1.0, float(scipy.linalg.norm(b))))


def _power_radius(a: Matrix, tol: float, max_iter: int, restarts: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    n = a.shape[0]
    for attempt in range(restarts):
        v = rng.normal(size=n)
        v /= scipy.linalg.norm(v)
        estimate = 0.0
        for _ in range(max_iter):
            w = a @ v
            w_norm = float(scipy.linalg.norm(w))
            if w_norm == 0.0:
                return 0.0
            if abs(w_norm - estimate) <= tol * max(1.0, w_norm):
                return w_norm
            estimate = w_norm
            v = w / w_norm
        logger.debug(f"Power iteration restart {attempt + 1}/{restarts} did not stabilize")
    raise NoConvergence(
        f"power iteration did not stabilize within {max_iter} iterations x {restarts} restarts"
    )


def spectral_radius(
    a,
    tol: float = 1e-10,
    method: str = "eig",
    max_iter: int = 10_000,
    restarts: int = 5,
    seed: int = 0,
) -> float:
    """
    Largest eigenvalue modulus of a square matrix.

    ``method="eig"`` uses a Hessenberg/QR eigen-solve; ``method="power"`` runs
    power iteration on A with random restarts, which only stabilizes when the
    dominant eigenvalue is real or the dominant modes share one modulus.

    Raises:
        NoConvergence: if the eigen-solve or the power iteration fails.
    """
    if tol <= 0:
        raise InvalidParams("tol must be positive")
    a = as_matrix(a, "A")
    _require_square(a, "A")
    if a.size == 0:
        return 0.0
    if method == "power":
        return _power_radius(a, tol, max_iter, restarts, seed)
    if method != "eig":
        raise InvalidParams(f"unknown spectral radius method: {method}")
    try:
        eigenvalues = scipy.linalg.eigvals(a, check_finite=False)
    except LinAlgError as e:
        raise NoConvergence(f"eigenvalue computation failed: {e}")
    return float(np.max(np.abs(eigenvalues)))


def operator_norm(a) -> float:
    """Induced 2-norm (largest singular value)."""
    a = as_matrix(a, "A")
    if a.size == 0:
        return 0.0
    return float(scipy.linalg.norm(a, 2))


def min_symmetric_eigenvalue(a: Matrix) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    if a.size == 0:
        return 0.0
    return float(scipy.linalg.eigvalsh(a, subset_by_index=[0, 0], check_finite=False)[0])


def min_norm_solve(a: Matrix, b: Vector) -> Tuple[Vector, float]:
    """Minimum-norm least-squares solution of A x = b and its residual norm."""
    x, _, _, _ = scipy.linalg.lstsq(a, b, check_finite=False)
    return x, float(scipy.linalg.norm(a @ x - b))
