"""Dense linear-algebra kernel used by every other module.

Matrices are plain ``numpy.ndarray``s (real ``float64`` or ``complex128``),
validated on entry: finite entries, correct shapes. Eigenvalue and solve
primitives delegate to LAPACK through numpy/scipy; the stable-invariant-
subspace routine implements the matrix sign-function iteration.

All tolerances are relative to Frobenius norms, with an absolute floor of
1e-14 for zero-norm edge cases.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import (
    ContractError,
    DefinitenessError,
    DimensionError,
    NoStabilizingSolutionError,
    NumericalError,
    SolverError,
)

ABS_FLOOR = 1e-14


def rel_tol(scale: float, rel: float) -> float:
    """Relative tolerance with the package-wide absolute floor."""
    return max(rel * scale, ABS_FLOOR)


def fro(M) -> float:
    return float(np.linalg.norm(M, "fro"))


def as_real_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate and return M as a finite real float64 2-D array."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"{name} must be a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractError(f"{name} contains non-finite entries")
    return A


def as_complex_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate and return M as a finite complex128 2-D array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"{name} must be a 2-D matrix, got shape {A.shape}")
    if not (np.all(np.isfinite(A.real)) and np.all(np.isfinite(A.imag))):
        raise ContractError(f"{name} contains non-finite entries")
    return A


def require_square(M, name: str = "matrix") -> np.ndarray:
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M


def eigenvalues(M) -> np.ndarray:
    """All eigenvalues of a real square matrix, with multiplicity.

    Returns a complex vector sorted by (real part, imaginary part) so the
    spectrum of a given matrix is reproducible across calls. Non-real
    values occur in conjugate pairs because the input is real.
    """
    A = require_square(as_real_matrix(M, "M"), "M")
    try:
        vals = sla.eigvals(A, check_finite=False)
    except Exception as exc:  # LAPACK non-convergence
        raise NumericalError("eigenvalue iteration failed", matrix_norm=fro(A)) from exc
    if not np.all(np.isfinite(vals)):
        raise NumericalError("eigenvalue iteration returned non-finite values",
                             matrix_norm=fro(A))
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


def hermitian_logdet(M) -> float:
    """ln det M for a Hermitian positive-definite matrix.

    Computed from a Cholesky factorization as twice the sum of the logs of
    the pivots; the determinant itself is never formed, so the result is
    immune to overflow/underflow of det M.
    """
    A = require_square(as_complex_matrix(M, "M"), "M")
    defect = fro(A - A.conj().T)
    if defect > rel_tol(fro(A), 1e-10):
        raise ContractError(
            f"matrix is not Hermitian (defect {defect:.3e} vs norm {fro(A):.3e})"
        )
    A = 0.5 * (A + A.conj().T)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("matrix is not positive definite") from exc
    return float(2.0 * np.sum(np.log(L.diagonal().real)))


def solve_linear(A, B) -> np.ndarray:
    """Solve A X = B for square nonsingular A.

    Rejects systems whose 2-norm condition estimate exceeds 1e12.
    """
    A = require_square(as_real_matrix(A, "A"), "A")
    B = as_real_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise DimensionError(f"B has {B.shape[0]} rows, expected {A.shape[0]}")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond >= 1e12:
        raise SolverError("matrix is singular or ill-conditioned",
                          condition_estimate=float(cond))
    return sla.solve(A, B, check_finite=False)


def _sign_function(H: np.ndarray, tol: float = 1e-12, maxiter: int = 100) -> np.ndarray:
    """Matrix sign of H via the scaled Newton iteration Z <- (Z/c + c Z^-1)/2."""
    Z = H.copy()
    n = H.shape[0]
    for _ in range(maxiter):
        Zinv = np.linalg.inv(Z)
        # determinant scaling keeps the iteration balanced without
        # changing its fixed point
        c = np.abs(np.linalg.det(Z)) ** (1.0 / n)
        if not np.isfinite(c) or c <= 0.0:
            c = 1.0
        Znew = 0.5 * (Z / c + c * Zinv)
        delta = fro(Znew - Z)
        Z = Znew
        if delta <= rel_tol(fro(Z), tol):
            return Z
    raise NumericalError("matrix sign iteration did not converge",
                         matrix_norm=fro(H))


def stable_invariant_subspace(H) -> np.ndarray:
    """Orthonormal basis of the stable invariant subspace of H.

    H must be square of even dimension 2m with no eigenvalues on the
    imaginary axis; the returned 2m x m basis X spans the invariant
    subspace for eigenvalues with negative real part and satisfies
    ``|H X - X (X^T H X)|_F <= 1e-8 |H|_F``.
    """
    A = require_square(as_real_matrix(H, "H"), "H")
    n = A.shape[0]
    if n % 2 != 0:
        raise DimensionError(f"H must have even dimension, got {n}")
    m = n // 2
    norm_h = fro(A)
    spec = eigenvalues(A)
    if np.min(np.abs(spec.real)) <= rel_tol(norm_h, 1e-9):
        raise NoStabilizingSolutionError(
            "no stabilizing solution: eigenvalue on the imaginary axis "
            f"(closest real part {np.min(np.abs(spec.real)):.3e})"
        )
    S = _sign_function(A)
    # spectral projector onto the stable subspace: sign is -I there
    proj = 0.5 * (np.eye(n) - S)
    k = int(round(np.trace(proj).real))
    if k != m:
        raise NoStabilizingSolutionError(
            f"stable subspace has dimension {k}, expected {m}"
        )
    Q, _, _ = sla.qr(proj, pivoting=True, mode="economic")
    X = Q[:, :m]
    residual = fro(A @ X - X @ (X.T @ A @ X))
    if residual > rel_tol(norm_h, 1e-8):
        raise NumericalError(
            f"invariant-subspace residual {residual:.3e} exceeds bound",
            matrix_norm=norm_h,
        )
    return X


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def min_eig_sym(M: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(sla.eigvalsh(symmetrize(M))[0])


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix; tiny negative eigenvalues
    from roundoff are clipped at zero."""
    w, U = sla.eigh(symmetrize(M))
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.T


def inv_sqrt_spd(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Symmetric inverse square root of a symmetric positive-definite matrix."""
    w, U = sla.eigh(symmetrize(M))
    if w[0] <= 0.0:
        raise DefinitenessError(f"{name} is not positive definite")
    return (U / np.sqrt(w)) @ U.T
