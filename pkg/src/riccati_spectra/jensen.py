"""Half-plane Jensen formulas for rational transfer functions.

For f(s) = p(s)/q(s) with deg p = deg q and equal leading coefficients
(so f -> 1 at infinity) and no zeros or poles on the imaginary axis, the
frequency average of ln|f(jw)| has a closed form: a high-frequency limit
term read off the coefficients, plus the right-half-plane zero sum, minus
(when poles may be unstable) the right-half-plane pole sum. Both the
closed form and an independent quadrature of the left side are provided;
their agreement is the correctness check everything else leans on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npp

from . import matrix_core as mc
from .errors import ContractError
from .quadrature import half_line_integral

MODE_STABLE = "prop1"    # all poles stable, pole term absent
MODE_GENERAL = "prop2"   # unstable poles allowed, pole term subtracted


def polynomial_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots of a polynomial given ascending coefficients.

    Computed as the eigenvalues of the companion matrix through the
    linear-algebra kernel; degree zero has no roots.
    """
    c = np.asarray(coeffs, dtype=float)
    m = c.size - 1
    if m == 0:
        return np.array([], dtype=complex)
    monic = c / c[-1]
    comp = np.zeros((m, m))
    comp[1:, :-1] = np.eye(m - 1)
    comp[:, -1] = -monic[:-1]
    return mc.eigenvalues(comp)


def _strip_leading(coeffs, name: str) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size == 0 or not np.all(np.isfinite(c)):
        raise ContractError(f"{name} coefficients must be finite and nonempty")
    maxmag = np.max(np.abs(c))
    if maxmag == 0.0:
        raise ContractError(f"{name} polynomial is identically zero")
    keep = c.size
    while keep > 1 and abs(c[keep - 1]) < 1e-12 * maxmag:
        keep -= 1
    return c[:keep]


@dataclass(frozen=True)
class RationalFunction:
    """Validated rational function p(s)/q(s) with unit limit at infinity."""

    numerator_coeffs: np.ndarray
    denominator_coeffs: np.ndarray
    zeros: np.ndarray
    poles: np.ndarray

    @property
    def degree(self) -> int:
        return self.numerator_coeffs.size - 1


def rational_function(numerator, denominator) -> RationalFunction:
    """Build a RationalFunction, enforcing every hypothesis at once.

    Checks: equal degrees after stripping negligible leading coefficients,
    equal leading coefficients (limit 1 at infinity), no zero or pole on
    the imaginary axis, no pole-zero cancellation within 1e-9.
    """
    p = _strip_leading(numerator, "numerator")
    q = _strip_leading(denominator, "denominator")
    if p.size != q.size:
        raise ContractError(
            f"numerator degree {p.size - 1} != denominator degree {q.size - 1}"
        )
    lead_gap = abs(p[-1] - q[-1])
    if lead_gap > 1e-9 * max(abs(p[-1]), abs(q[-1])):
        raise ContractError(
            "leading coefficients must match so f(s) -> 1 at infinity "
            f"(got {p[-1]:.12g} and {q[-1]:.12g})"
        )
    zeros = polynomial_roots(p)
    poles = polynomial_roots(q)
    for root, kind in [(z, "zero") for z in zeros] + [(r, "pole") for r in poles]:
        if abs(root.real) < 1e-10 * (1.0 + abs(root)):
            raise ContractError(f"{kind} {root:.12g} lies on the imaginary axis")
    if zeros.size and poles.size:
        dist = np.abs(np.subtract.outer(zeros, poles))
        if dist.size and dist.min() < 1e-9:
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            raise ContractError(
                f"pole-zero cancellation: zero {zeros[i]:.12g} matches pole {poles[j]:.12g}"
            )
    return RationalFunction(
        numerator_coeffs=p, denominator_coeffs=q, zeros=zeros, poles=poles
    )


@dataclass(frozen=True)
class JensenResult:
    """Closed form and (optionally) its quadrature cross-check.

    closed_form = limit_term + zeros_term - poles_term, stored exactly
    that way; residual = |integral_numeric - closed_form| when the
    numeric side was evaluated.
    """

    integral_numeric: float | None
    limit_term: float
    zeros_term: float
    poles_term: float
    closed_form: float
    residual: float | None


def limit_term(f: RationalFunction) -> float:
    """High-frequency limit term (p_{m-1}/p_m - q_{m-1}/q_m) / 2."""
    p, q = f.numerator_coeffs, f.denominator_coeffs
    if p.size == 1:
        return 0.0
    return 0.5 * (p[-2] / p[-1] - q[-2] / q[-1])


def jensen_closed_form(f: RationalFunction,
                       stable_poles_only: bool) -> JensenResult:
    """Closed-form frequency average of ln|f(jw)|.

    With stable_poles_only the pole term is identically zero and any
    unstable pole is a contract violation (the caller should use the
    general mode); otherwise right-half-plane poles are subtracted.
    """
    zterm = float(np.sum(np.maximum(0.0, f.zeros.real))) if f.zeros.size else 0.0
    if stable_poles_only:
        unstable = f.poles[f.poles.real > 0.0] if f.poles.size else []
        if len(unstable):
            raise ContractError(
                "unstable pole(s) present "
                f"({', '.join(f'{p:.6g}' for p in unstable)}); "
                "use the general mode, which subtracts the pole term"
            )
        pterm = 0.0
    else:
        pterm = float(np.sum(np.maximum(0.0, f.poles.real))) if f.poles.size else 0.0
    lterm = limit_term(f)
    return JensenResult(
        integral_numeric=None,
        limit_term=lterm,
        zeros_term=zterm,
        poles_term=pterm,
        closed_form=lterm + zterm - pterm,
        residual=None,
    )


def jensen_numeric(f: RationalFunction, tol: float) -> float:
    """(1/2pi) int ln|f(jw)| dw by adaptive quadrature.

    Real coefficients make |f(jw)| even in w, so only the half line is
    integrated. Roots within 1e-8 of the axis make the integral
    ill-conditioned; a warning is attached in that case.
    """
    if not (1e-12 <= tol <= 1e-3):
        raise ContractError(f"tol must lie in [1e-12, 1e-3], got {tol:g}")
    near = [r for r in np.concatenate([f.zeros, f.poles])
            if abs(r.real) < 1e-8 * (1.0 + abs(r))]
    if near:
        warnings.warn(
            "root(s) within 1e-8 of the imaginary axis; the integral is "
            f"ill-conditioned near |w| = {abs(near[0].imag):.6g}",
            RuntimeWarning,
            stacklevel=2,
        )

    p, q = f.numerator_coeffs, f.denominator_coeffs

    def integrand(omegas: np.ndarray) -> np.ndarray:
        s = 1j * omegas
        pv = npp.polyval(s, p)
        qv = npp.polyval(s, q)
        return np.log(np.abs(pv)) - np.log(np.abs(qv))

    splits = [abs(r.imag) for r in near]
    return half_line_integral(integrand, tol, singular_omegas=splits) / np.pi


def verify_jensen(f: RationalFunction, mode: str, tol: float) -> JensenResult:
    """Evaluate both routes and report their residual.

    mode is "prop1" (all poles must be stable) or "prop2" (general).
    """
    if mode not in (MODE_STABLE, MODE_GENERAL):
        raise ContractError(f"mode must be '{MODE_STABLE}' or '{MODE_GENERAL}'")
    closed = jensen_closed_form(f, stable_poles_only=(mode == MODE_STABLE))
    numeric = jensen_numeric(f, tol)
    return JensenResult(
        integral_numeric=numeric,
        limit_term=closed.limit_term,
        zeros_term=closed.zeros_term,
        poles_term=closed.poles_term,
        closed_form=closed.closed_form,
        residual=abs(numeric - closed.closed_form),
    )


def from_roots(zeros, poles, leading: float = 1.0) -> RationalFunction:
    """Convenience constructor from prescribed zeros and poles."""
    p = npp.polyfromroots(zeros) * leading
    q = npp.polyfromroots(poles) * leading
    if np.max(np.abs(p.imag)) > 1e-10 * max(np.max(np.abs(p)), 1.0):
        raise ContractError("zeros must come in conjugate pairs")
    if np.max(np.abs(q.imag)) > 1e-10 * max(np.max(np.abs(q)), 1.0):
        raise ContractError("poles must come in conjugate pairs")
    return rational_function(p.real, q.real)
