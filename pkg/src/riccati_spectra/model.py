"""Plant description and validation.

A model is the quadruple (A, C, W, V): state dynamics, output map,
process-noise intensity and measurement-noise intensity. Construction
enforces symmetry and definiteness of the noise intensities and
detectability of (A, C); every violated invariant is reported, not just
the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import matrix_core as mc
from .errors import DimensionError, ModelRejectionError

# eigenvalues this close to the closed right half-plane must pass the
# PBH test; marginal modes are included conservatively
DETECT_RE_THRESHOLD = -1e-9


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of model validation.

    ``offending_eigenvalues`` lists unstable (or marginal) modes of A that
    fail the PBH rank test; ``detectable`` is true iff that list is empty.
    Symmetry defects and definiteness margins are filled when W and V were
    assessed (build_model), and stay None for the detectability-only path.
    """

    detectable: bool
    offending_eigenvalues: list = field(default_factory=list)
    symmetry_defect_w: float | None = None
    symmetry_defect_v: float | None = None
    min_eig_w: float | None = None
    min_eig_v: float | None = None


@dataclass(frozen=True)
class SystemModel:
    """Validated plant (A, C, W, V) with dimensions m states, l outputs."""

    A: np.ndarray
    C: np.ndarray
    W: np.ndarray
    V: np.ndarray
    m: int
    l: int
    validation: ValidationReport

    def __post_init__(self):
        for name in ("A", "C", "W", "V"):
            getattr(self, name).setflags(write=False)


def validate_detectability(A, C) -> ValidationReport:
    """PBH eigenvector test for detectability of (A, C).

    For every eigenvalue of A with real part >= -1e-9 the stacked matrix
    [A - lambda I; C] must have full numerical column rank; each failing
    eigenvalue is reported.
    """
    A = mc.require_square(mc.as_real_matrix(A, "A"), "A")
    C = mc.as_real_matrix(C, "C")
    m = A.shape[0]
    if C.shape[1] != m:
        raise DimensionError(f"C has {C.shape[1]} columns, expected {m}")
    scale = 1.0 + mc.fro(A) + mc.fro(C)
    offending = []
    for lam in mc.eigenvalues(A):
        if lam.real < DETECT_RE_THRESHOLD:
            continue
        stacked = np.vstack([A - lam * np.eye(m), C.astype(complex)])
        smin = sla.svdvals(stacked)[-1]
        if smin <= 1e-9 * scale:
            offending.append(complex(lam))
    return ValidationReport(detectable=not offending,
                            offending_eigenvalues=offending)


def build_model(A, C, W, V) -> SystemModel:
    """Validate (A, C, W, V) and return a SystemModel.

    Checks, in order: dimensional consistency, symmetry of W and V (small
    defects are repaired by symmetrization and recorded), W positive
    semidefinite, V positive definite, (A, C) detectable. All violations
    are collected into a single ModelRejectionError.
    """
    violations = []
    A = mc.require_square(mc.as_real_matrix(A, "A"), "A")
    m = A.shape[0]
    C = mc.as_real_matrix(C, "C")
    if C.shape[1] != m:
        raise DimensionError(f"C has {C.shape[1]} columns, expected {m}")
    l = C.shape[0]
    W = mc.require_square(mc.as_real_matrix(W, "W"), "W")
    if W.shape[0] != m:
        raise DimensionError(f"W must be {m}x{m}, got {W.shape}")
    V = mc.require_square(mc.as_real_matrix(V, "V"), "V")
    if V.shape[0] != l:
        raise DimensionError(f"V must be {l}x{l}, got {V.shape}")

    defect_w = mc.fro(W - W.T)
    if defect_w > mc.rel_tol(mc.fro(W), 1e-10):
        violations.append(f"W not symmetric (defect {defect_w:.3e})")
    W = mc.symmetrize(W)

    defect_v = mc.fro(V - V.T)
    if defect_v > mc.rel_tol(mc.fro(V), 1e-10):
        violations.append(f"V not symmetric (defect {defect_v:.3e})")
    V = mc.symmetrize(V)

    min_w = mc.min_eig_sym(W)
    if min_w < -1e-10 * max(mc.fro(W), 1.0):
        violations.append(f"W not positive semidefinite (min eigenvalue {min_w:.3e})")

    min_v = mc.min_eig_sym(V)
    if min_v <= max(1e-12 * mc.fro(V), 0.0):
        violations.append(f"V not positive definite (min eigenvalue {min_v:.3e})")

    detect = validate_detectability(A, C)
    if not detect.detectable:
        offs = ", ".join(f"{z:.6g}" for z in detect.offending_eigenvalues)
        violations.append(f"(A, C) not detectable (offending eigenvalues: {offs})")

    report = ValidationReport(
        detectable=detect.detectable,
        offending_eigenvalues=detect.offending_eigenvalues,
        symmetry_defect_w=defect_w,
        symmetry_defect_v=defect_v,
        min_eig_w=min_w,
        min_eig_v=min_v,
    )
    if violations:
        raise ModelRejectionError(violations, report=report)
    return SystemModel(A=A, C=C, W=W, V=V, m=m, l=l, validation=report)
