"""Frequency-domain characterizations of the steady filtering error.

The central identity cross-verified here: the trace of the output error
covariance weighted by the inverse noise intensity,

    tr(C P C^T V^-1),

equals the frequency integral (1/2pi) int ln[det Phi_y(w) / det V] dw
plus twice the sum of the unstable eigenvalue real parts of A, where
Phi_y is the Popov function

    Phi_y(w) = C (jwI - A)^-1 W (-jwI - A)^-T C^T + V.

An equivalent closed form counts right-half-plane zeros and poles of
det[Phi_y(s) V^-1] through the spectral factorization by the closed-loop
matrix A - KC, and a Bode-type sensitivity integral gives a third,
independent evaluation route. All three are computed here, along with
trace bounds and the classical scalar/stationary reductions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import matrix_core as mc
from .errors import ContractError, PoleAtFrequencyError
from .model import SystemModel
from .quadrature import half_line_integral
from .riccati import CareSolution

# eigenvalues of A this close to the imaginary axis create integrable
# log singularities of the integrand at |Im lambda|
AXIS_EIG_REL = 1e-9


def unstable_sum(spectrum) -> float:
    """Sum of max{0, Re lambda} over a spectrum."""
    vals = np.atleast_1d(np.asarray(spectrum))
    return float(np.sum(np.maximum(0.0, vals.real)))


class PopovEvaluator:
    """Evaluates the Popov function and its whitened log-determinant.

    Caches the symmetric inverse square root of V (checked to invert V to
    within 1e-10 relative) and the spectrum of A, whose imaginary-axis
    members mark the integrable singularities of the log-det integrand.
    """

    def __init__(self, model: SystemModel):
        self.model = model
        self.v_inv_sqrt = mc.inv_sqrt_spd(model.V, "V")
        recon = self.v_inv_sqrt @ model.V @ self.v_inv_sqrt
        defect = mc.fro(recon - np.eye(model.l))
        if defect > mc.rel_tol(np.sqrt(model.l), 1e-10):
            raise ContractError(f"inverse square root of V failed (defect {defect:.3e})")
        self.a_spectrum = mc.eigenvalues(model.A)
        self.a_norm = mc.fro(model.A)
        axis = np.abs(self.a_spectrum.real) <= AXIS_EIG_REL * (1.0 + self.a_norm)
        self.singular_omegas = sorted({abs(float(l.imag))
                                       for l in self.a_spectrum[axis]})

    def _resolvent_rows(self, omegas: np.ndarray) -> np.ndarray:
        """C (jwI - A)^-1 for a batch of frequencies, shape (n, l, m)."""
        model = self.model
        n = omegas.size
        M = (1j * omegas)[:, None, None] * np.eye(model.m) - model.A
        # solve from the left through the transposed systems
        Xt = np.linalg.solve(np.transpose(M, (0, 2, 1)),
                             np.broadcast_to(model.C.T.astype(complex),
                                             (n, model.m, model.l)))
        return np.transpose(Xt, (0, 2, 1))

    def phi_batch(self, omegas: np.ndarray) -> np.ndarray:
        """Popov function at each frequency, shape (n, l, l), Hermitian PD."""
        R = self._resolvent_rows(omegas)
        W = self.model.W.astype(complex)
        return R @ W @ np.conj(np.transpose(R, (0, 2, 1))) + self.model.V

    def logdet_ratio_batch(self, omegas: np.ndarray) -> np.ndarray:
        """ln det[V^-1/2 Phi_y(w) V^-1/2] for a batch of frequencies."""
        Phi = self.phi_batch(omegas)
        S = self.v_inv_sqrt.astype(complex)
        ratio = S @ Phi @ S
        ratio = 0.5 * (ratio + np.conj(np.transpose(ratio, (0, 2, 1))))
        L = np.linalg.cholesky(ratio)
        diags = np.diagonal(L, axis1=1, axis2=2).real
        return 2.0 * np.sum(np.log(diags), axis=1)

    def _check_not_pole(self, omega: float):
        dist = np.min(np.abs(1j * omega - self.a_spectrum))
        if dist <= 1e-12 * (1.0 + self.a_norm):
            idx = int(np.argmin(np.abs(1j * omega - self.a_spectrum)))
            raise PoleAtFrequencyError(omega, complex(self.a_spectrum[idx]))


def popov_eval(ev: PopovEvaluator, omega: float) -> np.ndarray:
    """Phi_y at a single frequency, returned Hermitian (and verified PD
    implicitly by downstream factorizations)."""
    ev._check_not_pole(omega)
    Phi = ev.phi_batch(np.array([float(omega)]))[0]
    return 0.5 * (Phi + Phi.conj().T)


def logdet_ratio(ev: PopovEvaluator, omega: float) -> float:
    """ln det[Phi_y(w) V^-1] at a single frequency; nonnegative because
    the whitened ratio matrix dominates the identity."""
    Phi = popov_eval(ev, omega)
    S = ev.v_inv_sqrt
    return mc.hermitian_logdet(S @ Phi @ S)


def frequency_integral(ev: PopovEvaluator, tol: float) -> float:
    """(1/2pi) int_{-inf}^{inf} ln det[Phi_y V^-1] dw by adaptive quadrature.

    Uses evenness to integrate the half line only; imaginary-axis
    eigenvalues of A become interior split points approached geometrically
    by the refinement, never evaluated.
    """
    if not (1e-12 <= tol <= 1e-3):
        raise ContractError(f"tol must lie in [1e-12, 1e-3], got {tol:g}")
    if mc.fro(ev.model.W) == 0.0:
        return 0.0
    value = half_line_integral(ev.logdet_ratio_batch, tol,
                               singular_omegas=ev.singular_omegas)
    return value / np.pi


@dataclass
class SpectralReport:
    """All frequency-domain routes to the weighted trace, with residuals.

    trace_from_integral is stored exactly as integral_term plus twice
    unstable_sum; each entry of residuals is the absolute difference of
    the two quantities its name points at.
    """

    trace_from_care: float
    integral_term: float
    unstable_sum: float
    trace_from_integral: float
    zeros_term: float | None = None
    poles_term: float | None = None
    trace_from_zeros_poles: float | None = None
    bode_integral: float | None = None
    bode_closed_form: float | None = None
    axis_zero_flag: bool = False
    residuals: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ZerosPolesResult:
    """Right-half-plane accounting of det[Phi_y(s) V^-1] after cancellation."""

    zeros_term: float
    poles_term: float
    trace_from_zeros_poles: float
    zeros: np.ndarray
    poles: np.ndarray
    axis_zero_flag: bool


@dataclass(frozen=True)
class TraceBounds:
    """Sandwich on tr P from the weighted-trace identity."""

    lower: float
    upper: float
    lambda_min: float
    lambda_max: float


def weighted_trace(model: SystemModel, care: CareSolution) -> float:
    """tr(C P C^T V^-1) from the Riccati solution."""
    return float(np.trace(sla.solve(model.V, care.output_error_cov,
                                    assume_a="sym")))


def verify_trace_identity(model: SystemModel, care: CareSolution,
                          tol: float) -> SpectralReport:
    """Cross-check the Riccati trace against the frequency integral."""
    ev = PopovEvaluator(model)
    trace_care = weighted_trace(model, care)
    integral = frequency_integral(ev, tol)
    usum = unstable_sum(ev.a_spectrum)
    trace_int = integral + 2.0 * usum
    report = SpectralReport(
        trace_from_care=trace_care,
        integral_term=integral,
        unstable_sum=usum,
        trace_from_integral=trace_int,
    )
    report.residuals["trace_identity"] = abs(trace_care - trace_int)
    return report


def _cancel_matches(zeros: np.ndarray, poles: np.ndarray, tol: float):
    """Remove exactly-matching zero/pole pairs (greedy nearest first)."""
    zs = list(zeros)
    ps = list(poles)
    while zs and ps:
        D = np.abs(np.subtract.outer(np.array(zs), np.array(ps)))
        i, j = np.unravel_index(np.argmin(D), D.shape)
        if D[i, j] > tol:
            break
        zs.pop(int(i))
        ps.pop(int(j))
    return np.array(zs), np.array(ps)


def zeros_poles_form(model: SystemModel, care: CareSolution) -> ZerosPolesResult:
    """Closed-form trace from zeros and poles of det[Phi_y(s) V^-1].

    The spectral factorization by I + C(sI - A)^-1 K gives

        det[Phi_y(s) V^-1] = det(sI - (A-KC)) det(-sI - (A-KC))
                             / [det(sI - A) det(-sI - A)],

    so candidate zeros are the closed-loop eigenvalues and their
    reflections, candidate poles the eigenvalues of A and theirs;
    coincident zero/pole pairs cancel before the right-half-plane sums
    are taken. A surviving zero within matching distance of the
    imaginary axis sets axis_zero_flag (boundary-zero caveat).
    """
    a_eigs = mc.eigenvalues(model.A)
    cl_eigs = mc.eigenvalues(care.closed_loop)
    zero_cands = np.concatenate([cl_eigs, -cl_eigs])
    pole_cands = np.concatenate([a_eigs, -a_eigs])
    match_tol = 1e-7 * (1.0 + mc.fro(model.A))
    zeros, poles = _cancel_matches(zero_cands, pole_cands, match_tol)
    zterm = unstable_sum(zeros) if zeros.size else 0.0
    pterm = unstable_sum(poles) if poles.size else 0.0
    usum = unstable_sum(a_eigs)
    axis_flag = bool(zeros.size and np.min(np.abs(zeros.real)) < match_tol)
    return ZerosPolesResult(
        zeros_term=zterm,
        poles_term=pterm,
        trace_from_zeros_poles=zterm - pterm + 2.0 * usum,
        zeros=zeros,
        poles=poles,
        axis_zero_flag=axis_flag,
    )


def bode_sensitivity_integral(model: SystemModel, care: CareSolution,
                              tol: float):
    """Sensitivity integral of the estimator viewed as a feedback loop.

    Returns (integral, closed_form): the quadrature value of
    (1/2pi) int ln |det[I + L(jw)]^-1| dw with loop gain
    L(s) = C (sI - A)^-1 K, and the closed form
    -tr(CK)/2 + sum max{0, Re lambda_i(A)}. The integrand is evaluated
    through a pivoted LU determinant of the l x l return difference, a
    route independent of the Hermitian log-det machinery.
    """
    if not (1e-12 <= tol <= 1e-3):
        raise ContractError(f"tol must lie in [1e-12, 1e-3], got {tol:g}")
    ev = PopovEvaluator(model)
    K = care.K.astype(complex)
    eye_l = np.eye(model.l)

    def integrand(omegas: np.ndarray) -> np.ndarray:
        R = ev._resolvent_rows(omegas)
        S = eye_l + R @ K
        _, logabs = np.linalg.slogdet(S)
        return -logabs

    closed_form = (-0.5 * float(np.trace(model.C @ care.K))
                   + unstable_sum(ev.a_spectrum))
    if mc.fro(care.K) == 0.0:
        return 0.0, closed_form
    value = half_line_integral(integrand, tol,
                               singular_omegas=ev.singular_omegas) / np.pi
    return value, closed_form


def trace_bounds(model: SystemModel, report: SpectralReport) -> TraceBounds:
    """Bounds on tr P from the weighted trace and the spectrum of C^T V^-1 C."""
    gram = model.C.T @ sla.solve(model.V, model.C, assume_a="sym")
    eigs = sla.eigvalsh(mc.symmetrize(gram))
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    trace = report.trace_from_integral
    lower = trace / lam_max if lam_max > 1e-12 else 0.0
    upper = trace / lam_min if lam_min > 1e-12 else np.inf
    return TraceBounds(lower=lower, upper=upper,
                       lambda_min=lam_min, lambda_max=lam_max)


@dataclass(frozen=True)
class SpecialCaseResult:
    """One classical reduction, evaluated independently when applicable."""

    name: str
    applicable: bool
    residual: float | None
    detail: str


def _scalar_spectrum_rows(ev: PopovEvaluator, omegas: np.ndarray) -> np.ndarray:
    """x W x^H for the single output row x = C (jwI - A)^-1, real valued."""
    R = ev._resolvent_rows(omegas)[:, 0, :]
    return np.real(np.einsum("ni,ij,nj->n", R, ev.model.W.astype(complex),
                             np.conj(R)))


def special_case_checks(model: SystemModel, care: CareSolution,
                        report: SpectralReport,
                        tol: float = 1e-9) -> list[SpecialCaseResult]:
    """Evaluate each applicable classical reduction independently.

    Five reductions are checked: the single-output form, the
    Yovits-Jackson formula (single output, stable dynamics), the
    unit-noise form (V = I), the zero-process-noise form (W = 0), and
    the fully scalar form (l = m = 1). Inapplicable reductions are
    reported as skipped, never silently passed.
    """
    results = []
    ev = PopovEvaluator(model)
    a_hurwitz = bool(np.max(ev.a_spectrum.real) < 0.0)
    usum = unstable_sum(ev.a_spectrum)
    occ = float(care.output_error_cov[0, 0]) if model.l == 1 else None

    # single output: C P C^T from the scalar output spectrum
    if model.l == 1:
        sigma_v2 = float(model.V[0, 0])

        def integrand(om):
            return np.log(_scalar_spectrum_rows(ev, om) / sigma_v2 + 1.0)

        if mc.fro(model.W) == 0.0:
            integral = 0.0
        else:
            integral = half_line_integral(integrand, tol,
                                          singular_omegas=ev.singular_omegas) / np.pi
        reduced = sigma_v2 * integral + 2.0 * sigma_v2 * usum
        results.append(SpecialCaseResult(
            "scalar_output", True, abs(occ - reduced),
            f"C P C^T = {occ:.12g} vs scalar-spectrum form {reduced:.12g}"))
    else:
        results.append(SpecialCaseResult(
            "scalar_output", False, None, "skipped: l != 1"))

    # Yovits-Jackson: single output and stable dynamics
    if model.l == 1 and a_hurwitz:
        sigma_v2 = float(model.V[0, 0])

        def integrand_yj(om):
            sz = _scalar_spectrum_rows(ev, om)
            return np.log((sz + sigma_v2) / sigma_v2)

        if mc.fro(model.W) == 0.0:
            integral = 0.0
        else:
            integral = half_line_integral(integrand_yj, tol) / np.pi
        reduced = sigma_v2 * integral
        results.append(SpecialCaseResult(
            "yovits_jackson", True, abs(occ - reduced),
            f"C P C^T = {occ:.12g} vs Yovits-Jackson value {reduced:.12g}"))
    else:
        results.append(SpecialCaseResult(
            "yovits_jackson", False, None,
            "skipped: needs l == 1 and Hurwitz dynamics"))

    # identity measurement noise: plain log-det of the output spectrum
    if mc.fro(model.V - np.eye(model.l)) <= 1e-12 * np.sqrt(model.l):
        def integrand_vi(om):
            Phi = ev.phi_batch(om)
            Phi = 0.5 * (Phi + np.conj(np.transpose(Phi, (0, 2, 1))))
            L = np.linalg.cholesky(Phi)
            d = np.diagonal(L, axis1=1, axis2=2).real
            return 2.0 * np.sum(np.log(d), axis=1)

        if mc.fro(model.W) == 0.0:
            integral = 0.0
        else:
            integral = half_line_integral(integrand_vi, tol,
                                          singular_omegas=ev.singular_omegas) / np.pi
        reduced = integral + 2.0 * usum
        trace_occ = float(np.trace(care.output_error_cov))
        results.append(SpecialCaseResult(
            "identity_noise", True, abs(trace_occ - reduced),
            f"tr(C P C^T) = {trace_occ:.12g} vs unit-noise form {reduced:.12g}"))
    else:
        results.append(SpecialCaseResult(
            "identity_noise", False, None, "skipped: V != I"))

    # zero process noise: trace collapses to the instability measure
    if mc.fro(model.W) == 0.0:
        results.append(SpecialCaseResult(
            "zero_process_noise", True,
            abs(report.trace_from_care - 2.0 * usum),
            f"trace = {report.trace_from_care:.12g} vs 2*unstable = {2 * usum:.12g}"))
    else:
        results.append(SpecialCaseResult(
            "zero_process_noise", False, None, "skipped: W != 0"))

    # fully scalar system: explicit resolvent magnitude form
    if model.l == 1 and model.m == 1:
        a = float(model.A[0, 0])
        c = float(model.C[0, 0])
        sw2 = float(model.W[0, 0])
        sv2 = float(model.V[0, 0])

        def integrand_sc(om):
            return np.log(c * c * sw2 / sv2 / (om * om + a * a) + 1.0)

        if sw2 == 0.0 or c == 0.0:
            integral = 0.0
        else:
            integral = half_line_integral(
                integrand_sc, tol,
                singular_omegas=[0.0] if a == 0.0 else []) / np.pi
        reduced = (sv2 * integral + 2.0 * sv2 * max(0.0, a)) / (c * c) \
            if c != 0.0 else float(care.P[0, 0])
        results.append(SpecialCaseResult(
            "scalar_system", True, abs(float(care.P[0, 0]) - reduced),
            f"P = {float(care.P[0, 0]):.12g} vs scalar form {reduced:.12g}"))
    else:
        results.append(SpecialCaseResult(
            "scalar_system", False, None, "skipped: needs l = m = 1"))

    return results


def full_spectral_report(model: SystemModel, care: CareSolution,
                         tol: float = 1e-8,
                         with_zeros_poles: bool = True,
                         with_bode: bool = True) -> SpectralReport:
    """Assemble the complete report: integral, zeros/poles, Bode routes."""
    report = verify_trace_identity(model, care, tol)
    if with_zeros_poles:
        zp = zeros_poles_form(model, care)
        report.zeros_term = zp.zeros_term
        report.poles_term = zp.poles_term
        report.trace_from_zeros_poles = zp.trace_from_zeros_poles
        report.axis_zero_flag = zp.axis_zero_flag
        report.residuals["zeros_poles_identity"] = abs(
            report.trace_from_care - zp.trace_from_zeros_poles)
    if with_bode:
        value, closed = bode_sensitivity_integral(model, care, tol)
        report.bode_integral = value
        report.bode_closed_form = closed
        report.residuals["bode_identity"] = abs(value - closed)
    return report
