"""Adaptive quadrature primitives shared by the analytic modules.

All routines integrate vectorized scalar functions (``f(ndarray) -> ndarray``)
and report an error estimate together with the number of integrand
evaluations.  The implementation is a classic globally adaptive
Gauss-Kronrod (7,15) scheme with a worst-interval-first refinement loop,
plus the substitutions needed for the integrals that appear in this
package: semi-infinite tails of polynomially decaying jump densities and
punctured integrals over the real line with an integrable singularity at
the origin.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DivergenceError, QuadratureError

# 15-point Kronrod abscissae on [-1, 1] (positive half) and the matching
# Kronrod / 7-point Gauss weights.  Standard QUADPACK constants.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
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

# Full node vector in increasing order of |x| is not needed; build the
# symmetric 15-node layout once.
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 15 nodes, ascending
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GSLOTS = np.arange(15) % 2 == 1                            # Gauss nodes sit at odd slots
_GWEIGHTS = np.concatenate([_WG[:-1], _WG[::-1]])

_DEFAULT_LIMIT = 4000


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __add__(self, other: "QuadratureResult") -> "QuadratureResult":
        return QuadratureResult(
            self.value + other.value,
            self.abs_error_estimate + other.abs_error_estimate,
            self.evaluations + other.evaluations,
        )


_ZERO = QuadratureResult(0.0, 0.0, 0)


def _gk15(f: Callable, a: float, b: float):
    """One Gauss-Kronrod panel on [a, b]: (kronrod, error, nevals)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid + half * _NODES
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        raise TypeError("integrand must return an array matching its input shape")
    resk = half * float(_KWEIGHTS @ y)
    if not math.isfinite(resk):
        bad = x[~np.isfinite(y)]
        raise QuadratureError(
            f"non-finite integrand value at r={bad[0] if bad.size else x[0]!r}")
    resg = half * float(_GWEIGHTS @ y[_GSLOTS])
    # QUADPACK-style scaled error estimate: sharp on smooth panels, never
    # smaller than the raw |K - G| signal would justify.
    resasc = half * float(_KWEIGHTS @ np.abs(y - resk / (b - a)))
    err = abs(resk - resg)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    return resk, err, x.size


def _adaptive(f: Callable, breaks, tol: float, rel_tol: float = 0.0,
              limit: int = _DEFAULT_LIMIT) -> QuadratureResult:
    """Worst-interval-first refinement starting from the given panel breaks."""
    heap = []
    n = 0
    for a, b in zip(breaks[:-1], breaks[1:]):
        val, err, n1 = _gk15(f, a, b)
        heap.append((-err, a, b, val))
        n += n1
    heapq.heapify(heap)
    total_val = math.fsum(item[3] for item in heap)
    total_err = math.fsum(-item[0] for item in heap)
    while total_err > max(tol, rel_tol * abs(total_val)) and len(heap) < limit:
        neg_err, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:       # interval at floating-point resolution
            heapq.heappush(heap, (neg_err, lo, hi, v))
            break
        v1, e1, n1 = _gk15(f, lo, mid)
        v2, e2, n2 = _gk15(f, mid, hi)
        n += n1 + n2
        total_val += v1 + v2 - v
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
    total_val = math.fsum(item[3] for item in heap)
    total_err = math.fsum(-item[0] for item in heap)
    if total_err > max(tol, rel_tol * abs(total_val)):
        raise QuadratureError(
            f"adaptive quadrature did not converge on [{breaks[0]}, {breaks[-1]}]: "
            f"error {total_err:.3e} > tol {tol:.3e}",
            value=total_val, error_estimate=total_err, evaluations=n)
    return QuadratureResult(total_val, total_err, n)


def integrate_interval(f: Callable, a: float, b: float, tol: float,
                       rel_tol: float = 0.0, limit: int = _DEFAULT_LIMIT) -> QuadratureResult:
    """Adaptive integration of ``f`` over the finite interval [a, b].

    Succeeds when the summed error estimate drops below
    ``max(tol, rel_tol * |value|)``; otherwise raises
    :class:`QuadratureError` carrying the best estimate.  Endpoints are
    never evaluated, so integrable endpoint singularities are handled by
    the bisection grading itself.
    """
    if not a < b:
        if a == b:
            return _ZERO
        raise ValueError(f"integrate_interval needs a < b, got ({a}, {b})")
    return _adaptive(f, (a, b), tol, rel_tol=rel_tol, limit=limit)


# Initial panels for the mapped half line.  The grading near both ends keeps
# narrow features just above the lower endpoint (threshold slivers) and far
# out in the tail from slipping between the nodes of one wide panel.
_SEMI_BREAKS = (0.0, 1e-5, 1e-3, 0.05, 0.3, 0.7, 0.95, 1.0)


def integrate_semi_infinite(f: Callable, a: float, tol: float,
                            rel_tol: float = 0.0, limit: int = _DEFAULT_LIMIT) -> QuadratureResult:
    """Integrate ``f`` over [a, oo) via the substitution r = a + s/(1-s)."""

    def g(s):
        s = np.asarray(s, dtype=float)
        one_m = 1.0 - s
        return f(a + s / one_m) / one_m ** 2

    return _adaptive(g, _SEMI_BREAKS, tol, rel_tol=rel_tol, limit=limit)


def _integrate_left_infinite(f: Callable, b: float, tol: float,
                             rel_tol: float = 0.0) -> QuadratureResult:
    """Integral over (-oo, b], by reflection."""
    return integrate_semi_infinite(lambda s: f(-s), -b, tol, rel_tol=rel_tol)


def integrate_dyadic_tail(f: Callable, a: float, tol: float,
                          max_blocks: int = 80, growth_limit: int = 8) -> QuadratureResult:
    """Integrate ``f`` over [a, oo) block by block with divergence detection.

    Blocks are [a*2^k, a*2^(k+1)].  If ``growth_limit`` consecutive block
    contributions increase in magnitude, the integral is declared divergent.
    Used for exponential-moment checks where the plain tail substitution
    would silently blow up inside a panel.  Requires a > 0.
    """
    if a <= 0:
        raise ValueError("integrate_dyadic_tail needs a > 0")
    total, err_total, n = 0.0, 0.0, 0
    grow = 0
    prev = None
    seen_mass = False
    for k in range(max_blocks):
        lo, hi = a * 2.0 ** k, a * 2.0 ** (k + 1)
        res = integrate_interval(f, lo, hi, tol / (4.0 * (k + 1) ** 2), rel_tol=1e-12)
        total += res.value
        err_total += res.abs_error_estimate
        n += res.evaluations
        mag = abs(res.value)
        seen_mass = seen_mass or mag > tol / 4.0
        if prev is not None and mag > prev:
            grow += 1
            if grow >= growth_limit:
                raise DivergenceError(
                    f"tail integral from {a} diverges: {growth_limit} successive "
                    f"dyadic blocks grew (last block [{lo:.3g}, {hi:.3g}] "
                    f"contributed {res.value:.3e})",
                    value=total, error_estimate=float("inf"), evaluations=n)
        else:
            grow = 0
        # Stop only after real mass has appeared and decayed; otherwise a
        # compactly supported integrand further out could be skipped.
        if seen_mass and prev is not None and mag < tol / 4.0 and prev < tol / 4.0:
            ratio = min(mag / prev, 0.9) if prev > 0 else 0.0
            tail_est = mag * ratio / (1.0 - ratio)
            if tail_est < tol / 2.0:
                return QuadratureResult(total, err_total + tail_est, n)
        prev = mag
    if not seen_mass:
        return QuadratureResult(total, err_total, n)
    raise QuadratureError(
        f"dyadic tail from {a} did not settle within {max_blocks} blocks",
        value=total, error_estimate=err_total, evaluations=n)


def _shell_sum(f: Callable, side: int, delta0: float, tol: float,
               max_shells: int = 2000, growth_limit: int = 8) -> QuadratureResult:
    """Sum dyadic shells (0, delta0] approaching the origin from one side.

    ``side`` is +1 for (0, delta0], -1 for [-delta0, 0).  Stops once two
    consecutive shell contributions plus the extrapolated geometric tail
    fall below ``tol``; raises :class:`DivergenceError` if ``growth_limit``
    consecutive shells grow.
    """
    total, err_total, n = 0.0, 0.0, 0
    grow, prev = 0, None
    seen_mass = False
    min_shells = 60    # do not trust an all-zero prefix: support may sit deeper
    for k in range(max_shells):
        hi = delta0 * 2.0 ** (-k)
        lo = 0.5 * hi
        a, b = (lo, hi) if side > 0 else (-hi, -lo)
        res = integrate_interval(f, a, b, tol / (10.0 * (k + 1) ** 2), rel_tol=1e-12)
        total += res.value
        err_total += res.abs_error_estimate
        n += res.evaluations
        mag = abs(res.value)
        seen_mass = seen_mass or mag > tol / 10.0
        if prev is not None:
            if mag > prev:
                grow += 1
                if grow >= growth_limit:
                    raise DivergenceError(
                        f"shell sum near 0 diverges ({growth_limit} growing shells; "
                        f"last shell magnitude {mag:.3e})",
                        value=total, error_estimate=float("inf"), evaluations=n)
            else:
                grow = 0
            if (seen_mass or k >= min_shells) and mag < tol / 10.0 and prev < tol / 10.0:
                ratio = min(mag / prev, 0.9) if prev > 0 else 0.0
                tail_est = mag * ratio / (1.0 - ratio) if ratio > 0 else mag
                if tail_est < tol / 8.0:
                    return QuadratureResult(total, err_total + tail_est, n)
        prev = mag
    raise QuadratureError(
        "shell accumulation near the origin did not settle",
        value=total, error_estimate=err_total, evaluations=n)


def integrate_punctured(f: Callable, eps: float, tol: float) -> QuadratureResult:
    """Integrate ``f`` over {r : |r| > eps}, or over R \\ {0} when eps = 0.

    For ``eps = 0`` the caller guarantees integrability at the origin; the
    inner region is then accumulated over dyadic shells so that an
    integrable singularity at 0 is graded correctly and a non-integrable
    one trips the divergence detector.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps > 0:
        right = integrate_semi_infinite(f, eps, tol / 2.0)
        left = _integrate_left_infinite(f, -eps, tol / 2.0)
        return left + right
    delta0 = 0.5
    out = integrate_semi_infinite(f, delta0, tol / 4.0) + \
        _integrate_left_infinite(f, -delta0, tol / 4.0)
    out = out + _shell_sum(f, +1, delta0, tol / 4.0)
    out = out + _shell_sum(f, -1, delta0, tol / 4.0)
    return out


def integrate_double(f: Callable, outer_domain: Sequence[tuple], inner_domain: Callable,
                     tol: float) -> QuadratureResult:
    """Iterated adaptive quadrature of ``f(outer, inner)``.

    ``outer_domain`` is a sequence of (a, b) intervals (finite, or with
    ``math.inf`` / ``-math.inf`` endpoints); ``inner_domain(r)`` returns the
    finite (lo, hi) bounds of the inner integral at outer point ``r``.  The
    inner integrals run at ``tol / (20 * n_pieces)`` and their budget is
    folded into the reported error estimate.
    """
    pieces = list(outer_domain)
    if not pieces:
        return _ZERO
    inner_tol = tol / (20.0 * len(pieces))
    outer_tol = tol / (2.0 * len(pieces))
    evals = 0

    def g(r_array):
        nonlocal evals
        out = np.empty_like(np.asarray(r_array, dtype=float))
        for i, r in enumerate(np.asarray(r_array, dtype=float)):
            lo, hi = inner_domain(float(r))
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError("inner_domain must return finite bounds")
            if hi <= lo:
                out[i] = 0.0
                continue
            res = integrate_interval(lambda s, r=r: f(np.full_like(np.asarray(s, dtype=float), r), s),
                                     lo, hi, inner_tol, rel_tol=1e-12)
            evals += res.evaluations
            out[i] = res.value
        return out

    total = _ZERO
    for (a, b) in pieces:
        if math.isinf(b) and not math.isinf(a):
            res = integrate_semi_infinite(g, a, outer_tol)
        elif math.isinf(a) and not math.isinf(b):
            res = _integrate_left_infinite(g, b, outer_tol)
        elif math.isinf(a) and math.isinf(b):
            res = integrate_semi_infinite(g, 0.0, outer_tol / 2) + \
                _integrate_left_infinite(g, 0.0, outer_tol / 2)
        else:
            res = integrate_interval(g, a, b, outer_tol)
        total = total + res
    # Bound on the error the inner tolerance can have injected into the sum.
    injected = 10.0 * inner_tol * len(pieces)
    return QuadratureResult(total.value, total.abs_error_estimate + injected,
                            total.evaluations + evals)
