"""Adaptive Gauss-Kronrod quadrature for frequency-domain integrals.

The integrals this package needs are of the form ``int_0^inf g(omega)
d(omega)`` with ``g`` even in omega, decaying like ``1/omega^2``, and
possibly carrying integrable log singularities at isolated frequencies
(imaginary-axis eigenvalues of the dynamics). The half line is mapped to
``u in [0, 1)`` via ``omega = tan(pi u / 2)``, which renders the integrand
bounded at the far end; the domain is split at each singular abscissa and
an adaptive 7/15-point Gauss-Kronrod rule refines toward the splits
geometrically. Kronrod nodes are interior, so singular endpoints are
never evaluated.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .errors import QuadratureError

MAX_DEPTH = 60
MAX_INTERVALS = 200_000

# 15-point Kronrod nodes on [-1, 1] (positive half) with Kronrod weights,
# and the embedded 7-point Gauss weights (nonzero on alternate nodes).
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full node/weight vectors in ascending node order
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WEIGHTS_K = np.concatenate([_WK[:-1], _WK[::-1]])
_wg_full = np.zeros(8)
_wg_full[1::2] = _WG
_WEIGHTS_G = np.concatenate([_wg_full[:-1], _wg_full[::-1]])


def _panel(f, a: np.ndarray, b: np.ndarray):
    """Evaluate the G7/K15 pair on a batch of intervals.

    a, b are equal-length arrays of interval endpoints; f must accept a
    flat array of points. Returns (kronrod, error) per interval.
    """
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    pts = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    vals = np.asarray(f(pts), dtype=float).reshape(len(a), _NODES.size)
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        raise QuadratureError(
            f"integrand returned non-finite value at x = {pts[bad[0] * _NODES.size + bad[1]]:.12g}"
        )
    ik = half * (vals @ _WEIGHTS_K)
    ig = half * (vals @ _WEIGHTS_G)
    return ik, np.abs(ik - ig)


def adaptive_integral(f, a: float, b: float, tol: float,
                      interior_splits=()) -> float:
    """Integrate f over [a, b] with adaptive Gauss-Kronrod refinement.

    interior_splits are abscissae of known integrable singularities; the
    initial partition is cut there and bisection then approaches each
    split point geometrically. Accepts when the summed error estimate is
    below tol times the integrand mass (the larger of |integral| and the
    sum of panel magnitudes, so integrals that cancel to zero still
    terminate). Raises QuadratureError if an interval would need more
    than MAX_DEPTH bisections.
    """
    edges = [a]
    for s in sorted(interior_splits):
        if a < s < b and s - edges[-1] > 1e-15 * (b - a):
            edges.append(float(s))
    edges.append(b)

    lefts = np.array(edges[:-1])
    rights = np.array(edges[1:])
    ivals, errs = _panel(f, lefts, rights)

    # heap entries: (-error, seq, left, right, integral, depth)
    heap = []
    for i in range(len(lefts)):
        heap.append((-errs[i], i, lefts[i], rights[i], ivals[i], 0))
    heapq.heapify(heap)
    seq = len(lefts)

    while True:
        total = math.fsum(item[4] for item in heap)
        mass = math.fsum(abs(item[4]) for item in heap)
        total_err = math.fsum(-item[0] for item in heap)
        if total_err <= tol * max(abs(total), mass):
            return total
        worst = heapq.heappop(heap)
        _, _, wl, wr, _, wdepth = worst
        if wdepth >= MAX_DEPTH:
            raise QuadratureError(
                "refinement cap reached before meeting tolerance",
                worst_interval=(wl, wr, -worst[0]),
            )
        if len(heap) >= MAX_INTERVALS:
            raise QuadratureError(
                "interval budget exhausted before meeting tolerance",
                worst_interval=(wl, wr, -worst[0]),
            )
        mid = 0.5 * (wl + wr)
        ivals, errs = _panel(f, np.array([wl, mid]), np.array([mid, wr]))
        heapq.heappush(heap, (-errs[0], seq, wl, mid, ivals[0], wdepth + 1))
        heapq.heappush(heap, (-errs[1], seq + 1, mid, wr, ivals[1], wdepth + 1))
        seq += 2


def half_line_integral(g, tol: float, singular_omegas=()) -> float:
    """``int_0^inf g(omega) d(omega)`` via the tangent substitution.

    g must accept a flat array of frequencies. singular_omegas lists
    frequencies where g has an integrable singularity (never evaluated;
    the domain is split there).
    """

    def transformed(u: np.ndarray) -> np.ndarray:
        half_pi_u = 0.5 * np.pi * u
        omega = np.tan(half_pi_u)
        jacobian = 0.5 * np.pi / np.cos(half_pi_u) ** 2
        return np.asarray(g(omega), dtype=float) * jacobian

    splits = []
    for w in singular_omegas:
        w = abs(float(w))
        if w > 0.0:
            splits.append(2.0 / np.pi * math.atan(w))
    return adaptive_integral(transformed, 0.0, 1.0, tol, interior_splits=splits)
