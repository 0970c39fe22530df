"""Numerical validators for the small-jump reparameterization.

The state-dependent small-jump kernel K(x, A) = integral over marks of
1_A(gamma(x, r)) nu(x, r) restricted to |r| <= eps can be rewritten as the
image of the state-free measure h(w) 1_{|w|<=eps} dw under a map
delta(x, .).  The map is built from two cumulative-tail reparameterizations:

    psi(w)        tail mass of h beyond w     (signed, one branch per sign)
    psi_bar(x,w)  tail mass of nu(x,.) beyond w

    delta(x, w)      = gamma(x, inverse-psi_bar(x, psi(w)))
    delta_inverse    = inverse-psi(psi_bar(x, gamma_inverse(x, w)))

This module evaluates those objects numerically and checks the kernel
identity interval by interval, plus the regularity margins (bounded
w-slope, |d_x^i delta| <= k |w|, |1 + d_x delta| > eta) that make the
construction a diffeomorphism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, RootFindError
from .model import ModelSpec
from .quadrature import integrate_interval

_PSI_TOL = 1e-13
_ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class ReparamContext:
    """Model plus the small-jump cutoff the reparameterization lives under.

    The cutoff must sit inside the model's stable-like window; that window
    is model-specific and supplied by the caller.
    """

    model: ModelSpec
    eps: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ConfigurationError("reparameterization needs eps > 0")


def _is_separable_power_law(ctx: ReparamContext) -> bool:
    """Pure power-law h: psi has a closed-form antiderivative."""
    nu = ctx.model.nu
    return nu.power_law is not None and nu.power_law[1] == 0.0


def _level(ctx: ReparamContext):
    """level(x) when nu(x, r) = level(x) h(r); None otherwise."""
    return ctx.model.nu.separable_level


def psi(ctx: ReparamContext, w: float) -> float:
    """Signed tail mass of h inside the cutoff: negative on (0, eps),
    positive on (-eps, 0), diverging toward the origin."""
    eps = ctx.eps
    if w == 0.0 or abs(w) >= eps:
        raise ValueError(f"psi needs 0 < |w| < eps, got w={w}")
    if _is_separable_power_law(ctx):
        alpha = ctx.model.nu.power_law[0]
        mass = (abs(w) ** -alpha - eps ** -alpha) / alpha
        return -mass if w > 0 else mass
    h = ctx.model.nu.h
    if w > 0:
        return -integrate_interval(h, w, eps, _PSI_TOL, rel_tol=1e-11).value
    return integrate_interval(h, -eps, w, _PSI_TOL, rel_tol=1e-11).value


def psi_inverse(ctx: ReparamContext, v: float) -> float:
    """Inverse of psi: v < 0 lands in (0, eps), v > 0 in (-eps, 0)."""
    if v == 0.0:
        raise ValueError("psi_inverse needs v != 0")
    eps = ctx.eps
    if _is_separable_power_law(ctx):
        alpha = ctx.model.nu.power_law[0]
        mag = (eps ** -alpha + alpha * abs(v)) ** (-1.0 / alpha)
        return mag if v < 0 else -mag
    return _branch_root(lambda w: psi(ctx, w), eps, v)


def psi_bar(ctx: ReparamContext, x: float, w: float) -> float:
    """As psi, with the state-dependent intensity nu(x, .) in place of h."""
    eps = ctx.eps
    if w == 0.0 or abs(w) >= eps:
        raise ValueError(f"psi_bar needs 0 < |w| < eps, got w={w}")
    level = _level(ctx)
    if level is not None:
        return float(level(np.asarray(x, dtype=float))) * psi(ctx, w)
    nu = ctx.model.nu
    if w > 0:
        return -integrate_interval(lambda r: nu(x, r), w, eps, _PSI_TOL,
                                   rel_tol=1e-11).value
    return integrate_interval(lambda r: nu(x, r), -eps, w, _PSI_TOL,
                              rel_tol=1e-11).value


def psi_bar_inverse(ctx: ReparamContext, x: float, v: float) -> float:
    if v == 0.0:
        raise ValueError("psi_bar_inverse needs v != 0")
    level = _level(ctx)
    if level is not None:
        return psi_inverse(ctx, v / float(level(np.asarray(x, dtype=float))))
    return _branch_root(lambda w: psi_bar(ctx, x, w), ctx.eps, v)


def _branch_root(fn, eps: float, v: float) -> float:
    """Monotone root of fn(w) = v on the sign branch selected by v.

    On (0, eps) the map decreases to -inf toward the origin, so v < 0
    brackets there; v > 0 brackets on (-eps, 0) symmetrically.
    """
    sgn = 1.0 if v < 0 else -1.0
    hi = sgn * eps * (1.0 - 1e-12)
    lo = sgn * eps * 0.5
    for _ in range(300):
        val = fn(lo)
        if (val - v) * sgn <= 0.0:
            break
        lo *= 0.25
    else:
        raise RootFindError("branch bracketing for the tail inverse failed")
    a, b = (lo, hi) if lo < hi else (hi, lo)
    root = brentq(lambda w: fn(w) - v, a, b, xtol=5e-16, rtol=8.9e-16, maxiter=200)
    if abs(fn(root) - v) > _ROOT_RTOL * max(1.0, abs(v)):
        raise RootFindError(f"tail-inverse residual above tolerance at w={root}")
    return float(root)


def delta(ctx: ReparamContext, x: float, w: float) -> float:
    """The state-free-to-state-dependent jump map; continuously 0 at w = 0."""
    if w == 0.0:
        return 0.0
    if abs(w) >= ctx.eps:
        raise ValueError(f"delta needs |w| < eps, got w={w}")
    return float(ctx.model.gamma(x, psi_bar_inverse(ctx, x, psi(ctx, w))))


def delta_inverse(ctx: ReparamContext, x: float, w: float) -> float:
    if w == 0.0:
        return 0.0
    return psi_inverse(ctx, psi_bar(ctx, x, ctx.model.gamma.inverse(x, w)))


def kernel_equivalence_error(ctx: ReparamContext, x: float, a: float, b: float) -> float:
    """|K(x, (a,b)) - image measure of (a,b) under delta(x, .)|.

    Both sides are reduced to explicit limits through the monotone
    inverses and integrated directly; the return value is the absolute
    mismatch, which should sit at quadrature noise level when the
    construction is correct.  The interval must not straddle 0.
    """
    if not a < b:
        raise ValueError("need a < b")
    if a <= 0.0 <= b:
        raise ValueError("the test interval must stay away from 0")
    eps = ctx.eps
    model = ctx.model
    # left side: marks r with gamma(x, r) in (a, b) and |r| <= eps
    ra = model.gamma.inverse(x, a)
    rb = model.gamma.inverse(x, b)
    lo, hi = max(ra, -eps), min(rb, eps)
    lhs = 0.0
    if lo < hi:
        lhs = integrate_interval(lambda r: model.nu(x, r), lo, hi,
                                 _PSI_TOL, rel_tol=1e-11).value
    # right side: w with delta(x, w) in (a, b); delta maps onto
    # (gamma(x,-eps), gamma(x,eps)), so clip first
    g_lo = float(model.gamma(x, -eps))
    g_hi = float(model.gamma(x, eps))
    a_eff, b_eff = max(a, g_lo), min(b, g_hi)
    rhs = 0.0
    if a_eff < b_eff:
        wa = delta_inverse(ctx, x, a_eff)
        wb = delta_inverse(ctx, x, b_eff)
        if wa < wb:
            rhs = integrate_interval(ctx.model.nu.h, wa, wb, _PSI_TOL,
                                     rel_tol=1e-11).value
    return abs(lhs - rhs)


@dataclass(frozen=True)
class DeltaBoundReport:
    sup_abs_d2: float           # max |d_w delta| over the grid
    k_fit: tuple                # fitted constants: max |d_x^i delta| / |w|, i=0,1,2
    min_one_plus_d1: float
    eta: float
    grid_points: int

    @property
    def diffeomorphism_margin_ok(self) -> bool:
        return self.min_one_plus_d1 > self.eta

    @property
    def all_finite(self) -> bool:
        return (math.isfinite(self.sup_abs_d2)
                and all(math.isfinite(k) for k in self.k_fit)
                and math.isfinite(self.min_one_plus_d1))

    def as_dict(self) -> dict:
        return {"sup_abs_d2": self.sup_abs_d2, "k_fit": list(self.k_fit),
                "min_one_plus_d1": self.min_one_plus_d1, "eta": self.eta,
                "grid_points": self.grid_points,
                "diffeomorphism_margin_ok": self.diffeomorphism_margin_ok}


def delta_bound_check(ctx: ReparamContext, x_grid: Sequence[float],
                      w_grid: Sequence[float], eta: float = 1e-6) -> DeltaBoundReport:
    """Finite-difference sweep of the regularity margins of delta.

    Reports grid maxima and fitted slope constants rather than hard
    pass/fail for the boundedness statements, which a finite grid cannot
    certify; the diffeomorphism margin |1 + d_x delta| > eta is a proper
    boolean.
    """
    xs = np.asarray(x_grid, dtype=float)
    ws = np.asarray(w_grid, dtype=float)
    if np.any(np.abs(ws) >= ctx.eps) or np.any(ws == 0.0):
        raise ValueError("w_grid must lie in (-eps, eps) without 0")
    sup_d2 = 0.0
    k0 = k1 = k2 = 0.0
    min_one_plus = math.inf
    for x in xs:
        for w in ws:
            hw = min(1e-6, abs(w) / 8.0, (ctx.eps - abs(w)) / 8.0)
            d2 = (delta(ctx, x, w + hw) - delta(ctx, x, w - hw)) / (2.0 * hw)
            hx = 1e-5 * max(1.0, abs(x))
            dp = delta(ctx, x + hx, w)
            dm = delta(ctx, x - hx, w)
            d0 = delta(ctx, x, w)
            d1 = (dp - dm) / (2.0 * hx)
            hx2 = 1e-4 * max(1.0, abs(x))
            d11 = (delta(ctx, x + hx2, w) - 2.0 * d0 + delta(ctx, x - hx2, w)) / hx2 ** 2
            sup_d2 = max(sup_d2, abs(d2))
            k0 = max(k0, abs(d0) / abs(w))
            k1 = max(k1, abs(d1) / abs(w))
            k2 = max(k2, abs(d11) / abs(w))
            min_one_plus = min(min_one_plus, abs(1.0 + d1))
    return DeltaBoundReport(sup_abs_d2=sup_d2, k_fit=(k0, k1, k2),
                            min_one_plus_d1=min_one_plus, eta=eta,
                            grid_points=int(xs.size * ws.size))
