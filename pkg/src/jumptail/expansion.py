"""First- and second-order short-time tail-probability expansion.

For a state-dependent jump-diffusion started at x, the probability of
ending above x + y by a short time t expands as

    P[X_t >= x + y] = t * P1(x, y) + t^2/2 * P2(x, y) + o(t^2),

where P1 integrates the jump intensity over marks whose displacement
clears y, and P2 = D + J splits into a drift/volatility block D and a
jump-interaction block J.  The representations involve the small/large
jump cutoff eps, but the coefficients themselves do not depend on it once
eps is small enough; ``check_eps_compatible`` guards that regime.

Numerical notes
---------------
The two J integrals over the small-jump region pair an O(r^2) bracket
against the |r|^(-1-alpha) singularity of the intensity.  Evaluating the
brackets naively destroys the cancellation in double precision, so:

* the first bracket is a second-order Taylor remainder of a smooth
  function G(rho); below a small radius it is replaced by its exact
  quadratic term with G''(0) obtained by differencing the analytic G',
* the second bracket is reorganized exactly into a difference-form window
  integral plus a displacement defect, both of which subtract nearby
  evaluations of the same smooth function instead of two O(1) totals.

Everything else follows the formulas term by term with the sharp
indicator resolved into explicit integration limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError
from .model import ModelSpec, TruncationConfig, b_eps, gamma_bar
from .quadrature import (QuadratureResult, integrate_interval,
                         integrate_punctured, integrate_semi_infinite)

ABS_TOL = 1e-9          # per-subterm absolute target for production values
REL_TOL = 1e-8
_INNER_TOL = 1e-13      # inner (nested) quadratures
_FD_RHO = 1e-4          # step for differencing G' into G''


def default_truncation(y: float) -> TruncationConfig:
    """eps = min(0.01, y/10): comfortably inside the compatibility window."""
    return TruncationConfig(eps=min(0.01, y / 10.0))


def check_eps_compatible(model: ModelSpec, trunc: TruncationConfig,
                         x: float, y: float) -> bool:
    """True when the cutoff cannot clip the threshold-jump domain.

    Requires |gamma(x, +-eps)| < y/2 and gamma^{-1}(x, y) > eps, i.e. the
    jump that reaches the threshold is itself a "large" jump.
    """
    if y <= 0:
        raise ValueError("y must be > 0")
    e = trunc.eps
    g_plus = abs(float(model.gamma(x, e)))
    g_minus = abs(float(model.gamma(x, -e)))
    ri = model.gamma.inverse(x, y)
    return g_plus < y / 2.0 and g_minus < y / 2.0 and ri > e


@dataclass(frozen=True)
class ExpansionResult:
    p1: float
    d_term: float
    j_term: float
    p2: float
    quadrature_error: float
    t: Optional[float] = None
    order1: Optional[float] = None
    order2: Optional[float] = None
    order2_clamped: Optional[float] = None

    def order1_at(self, t: float) -> float:
        return t * self.p1

    def order2_at(self, t: float) -> float:
        return t * self.p1 + 0.5 * t * t * self.p2

    def order2_clamped_at(self, t: float) -> float:
        return min(1.0, max(0.0, self.order2_at(t)))


# ---------------------------------------------------------------------------
# shared quadrature pieces
# ---------------------------------------------------------------------------

def _tail_integral(fn: Callable, lo: float, eps: float, tol: float) -> QuadratureResult:
    """Integral of ``fn`` over [lo, oo) intersected with {|r| > eps}.

    The finite negative piece [lo, -eps] is covered in dyadic blocks grown
    away from -eps so that compactly supported integrands cannot be missed
    by a single wide panel.
    """
    total = QuadratureResult(0.0, 0.0, 0)
    if lo <= -eps:
        edge = -eps
        k = 0
        while edge > lo:
            nxt = max(lo, -eps * 2.0 ** (k + 1))
            total = total + integrate_interval(fn, nxt, edge, tol / (4.0 * (k + 1) ** 2),
                                               rel_tol=1e-12)
            edge = nxt
            k += 1
        start = eps
    elif lo < eps:
        start = eps
    else:
        start = lo
    return total + integrate_semi_infinite(fn, start, tol / 2.0, rel_tol=1e-12)


class _BigJumpRate:
    """Total accepted large-jump intensity z -> integral of nu(z, .) over
    {|r| > eps}.  For the separable built-in family nu = level(x) h(r) the
    state factor multiplies one cached h-mass; otherwise each state costs a
    punctured quadrature."""

    def __init__(self, model: ModelSpec, eps: float, tol: float):
        self.model = model
        self.eps = eps
        self.tol = tol
        self.level = model.nu.separable_level
        if self.level is not None:
            self._h_mass = integrate_punctured(model.nu.h, eps, tol).value

    def __call__(self, z: float) -> float:
        if self.level is not None:
            return float(self.level(np.asarray(z, dtype=float))) * self._h_mass
        return integrate_punctured(lambda r: self.model.nu(z, r), self.eps,
                                   self.tol).value


def _scaled_tol(weight: float, base: float = 1e-12) -> float:
    """Inner-integral tolerance matched to the outer weight multiplying it."""
    return min(1e-7, max(1e-13, base / max(abs(weight), 1e-9)))


# ---------------------------------------------------------------------------
# P1
# ---------------------------------------------------------------------------

def _p1_raw(model: ModelSpec, eps: float, x: float, y: float,
            tol: float) -> QuadratureResult:
    ri = model.gamma.inverse(x, y)
    return _tail_integral(lambda r: model.nu(x, r), ri, eps, tol)


def p1(model: ModelSpec, trunc: TruncationConfig | None, x: float, y: float,
       tol: float = ABS_TOL) -> float:
    """Leading-order tail coefficient: rate of single jumps clearing y."""
    if trunc is None:
        trunc = default_truncation(y)
    if not check_eps_compatible(model, trunc, x, y):
        raise ConfigurationError(
            f"eps={trunc.eps} is not small enough for the threshold y={y} at x={x}")
    return _p1_raw(model, trunc.eps, x, y, tol).value


# ---------------------------------------------------------------------------
# D term
# ---------------------------------------------------------------------------

def _d_term_raw(model: ModelSpec, eps: float, x: float, y: float, tol: float):
    inv = model.gamma.inverse_partials(x, y)
    ri = inv["r"]
    ind = 1.0 if abs(ri) > eps else 0.0
    nu_ri = float(model.nu(x, ri)) * ind
    dnu2_ri = float(model.nu.partial("r", x, ri)) * ind

    i1 = _tail_integral(lambda r: model.nu.partial("x", x, r), ri, eps, tol / 4)
    i2 = _tail_integral(lambda r: model.nu.partial("xx", x, r), ri, eps, tol / 4)

    u = x + y
    be_x = b_eps(model, TruncationConfig(eps), x, tol=tol / 4)
    be_u = b_eps(model, TruncationConfig(eps), u, tol=tol / 4)
    sig_x = float(model.sigma(x))
    sig_u = float(model.sigma(u))
    dsig_u = float(model.sigma.deriv(1, u))

    slope = inv["d1"] - inv["d2"]
    block_a = be_x * (-nu_ri * slope + i1.value)
    block_b = 0.5 * sig_x ** 2 * (
        -dnu2_ri * slope ** 2 + i2.value
        - nu_ri * (inv["d11"] - 2.0 * inv["d12"] + inv["d22"]))
    block_c = (be_u - sig_u * dsig_u) * nu_ri * inv["d2"]
    block_d = -0.5 * sig_u ** 2 * (dnu2_ri * inv["d2"] ** 2 + nu_ri * inv["d22"])
    err = i1.abs_error_estimate + i2.abs_error_estimate + tol / 2
    return block_a + block_b + block_c + block_d, err


def d_term(model: ModelSpec, trunc: TruncationConfig | None, x: float, y: float,
           tol: float = ABS_TOL) -> float:
    """Drift/volatility contribution to the second-order coefficient."""
    if trunc is None:
        trunc = default_truncation(y)
    if not check_eps_compatible(model, trunc, x, y):
        raise ConfigurationError(
            f"eps={trunc.eps} incompatible with (x={x}, y={y})")
    return _d_term_raw(model, trunc.eps, x, y, tol)[0]


# ---------------------------------------------------------------------------
# J term
# ---------------------------------------------------------------------------

def _j_term_raw(model: ModelSpec, eps: float, x: float, y: float, tol: float):
    nu, gamma = model.nu, model.gamma
    u = x + y
    err_accum = 0.0

    def nu_x(r):
        return nu(x, r)

    def G(rho: float) -> float:
        z = x + rho
        lo = gamma.inverse(z, y - rho)
        return _tail_integral(lambda r: nu(z, r), lo, eps, _INNER_TOL).value

    def G_prime(rho: float) -> float:
        z = x + rho
        invp = gamma.inverse_partials(z, y - rho)
        l = invp["r"]
        slope = invp["d1"] - invp["d2"]
        nu_l = float(nu(z, l)) * (1.0 if abs(l) > eps else 0.0)
        tail_d1 = _tail_integral(lambda r: nu.partial("x", z, r), l, eps, _INNER_TOL).value
        return -slope * nu_l + tail_d1

    g0 = G(0.0)
    gp0 = G_prime(0.0)

    # --- term 1: small-jump interaction with the tail functional ----------
    r_c = min(2e-4, eps / 4.0)

    def bracket1(r_arr):
        r_arr = np.asarray(r_arr, dtype=float)
        rho = np.asarray(gamma(x, r_arr), dtype=float)
        vals = np.array([G(float(p)) for p in np.ravel(rho)]).reshape(rho.shape)
        return (vals - g0 - rho * gp0) * nu_x(r_arr)

    t1_pos = integrate_interval(bracket1, r_c, eps, tol, rel_tol=REL_TOL)
    t1_neg = integrate_interval(bracket1, -eps, -r_c, tol, rel_tol=REL_TOL)
    err_accum += t1_pos.abs_error_estimate + t1_neg.abs_error_estimate

    def gamma_sq_nu(r):
        r = np.asarray(r, dtype=float)
        return np.asarray(gamma(x, r), dtype=float) ** 2 * nu_x(r)

    moment2 = (integrate_interval(gamma_sq_nu, 0.0, r_c, tol / 10, rel_tol=1e-8).value
               + integrate_interval(gamma_sq_nu, -r_c, 0.0, tol / 10, rel_tol=1e-8).value)
    if moment2 != 0.0:
        delta = _FD_RHO * max(1.0, abs(y))
        gpp0 = (G_prime(delta) - G_prime(-delta)) / (2.0 * delta)
        taylor_piece = 0.5 * gpp0 * moment2
        # allowance for the neglected cubic remainder below r_c
        err_accum += 5.0 * r_c * moment2
    else:
        taylor_piece = 0.0
    term1 = t1_pos.value + t1_neg.value + taylor_piece

    # --- term 2: window integral around the landing state x + y -----------
    def q_factory(r: float):
        def q(r1):
            r1 = np.asarray(r1, dtype=float)
            rinv = gamma.inverse_vec(x, r1 - x)
            ind = np.abs(rinv) > eps
            d2 = np.asarray(gamma.partial("r", x, rinv), dtype=float)
            return np.where(ind, np.asarray(nu(x, rinv), dtype=float), 0.0) / d2 \
                * np.asarray(nu.bar(r1, r), dtype=float)
        return q

    def s_times_h(r_arr):
        r_arr = np.asarray(r_arr, dtype=float)
        out = np.empty_like(r_arr)
        for i, r in enumerate(r_arr):
            r = float(r)
            zbar = gamma_bar(model, u, r)
            q = q_factory(r)
            qu = float(q(u))
            lo, hi = (zbar, u) if zbar <= u else (u, zbar)
            sign = 1.0 if zbar <= u else -1.0
            win = integrate_interval(lambda r1: q(r1) - qu, lo, hi,
                                     max(1e-15, 1e-13 * (hi - lo)), rel_tol=1e-11).value \
                if hi > lo else 0.0
            defect = float(gamma(zbar, r)) - float(gamma(u, r))
            out[i] = (sign * win + qu * defect) * float(nu.h(r))
        return out

    t2_pos = integrate_interval(s_times_h, 0.0, eps, tol, rel_tol=REL_TOL)
    t2_neg = integrate_interval(s_times_h, -eps, 0.0, tol, rel_tol=REL_TOL)
    term2 = t2_pos.value + t2_neg.value
    err_accum += t2_pos.abs_error_estimate + t2_neg.abs_error_estimate

    # --- terms 3-5: products of large-jump integrals -----------------------
    # The second jump of the two-jump term fires from the landed state
    # x + gamma(x, r1): both its threshold and its intensity live there.
    rate = _BigJumpRate(model, eps, tol / 10)

    def outer3(r1_arr):
        r1_arr = np.asarray(r1_arr, dtype=float)
        weights = np.asarray(nu_x(r1_arr), dtype=float)
        out = np.empty_like(r1_arr)
        for i, r1 in enumerate(r1_arr):
            r1 = float(r1)
            rho = float(gamma(x, r1))
            z1 = x + rho
            lo = gamma.inverse(z1, y - rho)
            out[i] = _tail_integral(lambda r: nu(z1, r), lo, eps,
                                    _scaled_tol(weights[i])).value
        return out * weights

    t3 = integrate_punctured(outer3, eps, tol)
    err_accum += t3.abs_error_estimate

    def outer4(r1_arr):
        r1_arr = np.asarray(r1_arr, dtype=float)
        out = np.empty_like(r1_arr)
        for i, r1 in enumerate(r1_arr):
            z = x + float(gamma(x, float(r1)))
            out[i] = rate(z)
        return out * nu_x(r1_arr)

    ri = gamma.inverse(x, y)
    t4 = _tail_integral(outer4, ri, eps, tol)
    err_accum += t4.abs_error_estimate

    term5 = -g0 * rate(x)

    parts = {"small_tail": term1, "window": term2, "two_jump": t3.value,
             "landed_rate": -t4.value, "product": term5}
    return term1 + term2 + t3.value - t4.value + term5, err_accum + tol / 10, parts


def j_term(model: ModelSpec, trunc: TruncationConfig | None, x: float, y: float,
           tol: float = ABS_TOL) -> float:
    """Jump-interaction contribution to the second-order coefficient."""
    if trunc is None:
        trunc = default_truncation(y)
    if not check_eps_compatible(model, trunc, x, y):
        raise ConfigurationError(
            f"eps={trunc.eps} incompatible with (x={x}, y={y})")
    return _j_term_raw(model, trunc.eps, x, y, tol)[0]


# ---------------------------------------------------------------------------
# assembled expansions
# ---------------------------------------------------------------------------

def tail_expansion(model: ModelSpec, trunc: TruncationConfig | None,
                   x: float, y: float, t: float, tol: float = ABS_TOL) -> ExpansionResult:
    """Second-order approximation of P[X_t >= x + y] from the start state x."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if trunc is None:
        trunc = default_truncation(y)
    if not check_eps_compatible(model, trunc, x, y):
        raise ConfigurationError(
            f"eps={trunc.eps} incompatible with (x={x}, y={y})")
    p1_res = _p1_raw(model, trunc.eps, x, y, tol)
    d_val, d_err = _d_term_raw(model, trunc.eps, x, y, tol)
    j_val, j_err, _ = _j_term_raw(model, trunc.eps, x, y, tol)
    p2 = d_val + j_val
    order1 = t * p1_res.value
    order2 = order1 + 0.5 * t * t * p2
    return ExpansionResult(
        p1=p1_res.value, d_term=d_val, j_term=j_val, p2=p2,
        quadrature_error=p1_res.abs_error_estimate + d_err + j_err,
        t=t, order1=order1, order2=order2,
        order2_clamped=min(1.0, max(0.0, order2)))


def _j_term_identity_raw(model: ModelSpec, eps: float, x: float, y: float, tol: float):
    """J for gamma(x, r) = r, evaluated from the specialized display."""
    nu = model.nu
    err_accum = 0.0

    def nu_x(r):
        return nu(x, r)

    def tail_nu(z: float, lo: float) -> float:
        return _tail_integral(lambda r: nu(z, r), lo, eps, _INNER_TOL).value

    nu_xy = float(nu(x, y)) * (1.0 if abs(y) > eps else 0.0)
    tail0 = tail_nu(x, y)
    tail_d1 = _tail_integral(lambda r: nu.partial("x", x, r), y, eps, _INNER_TOL).value

    # term 1 with G(rho) = integral of nu(x+rho, .) above y-rho
    r_c = min(2e-4, eps / 4.0)

    def G(rho: float) -> float:
        return tail_nu(x + rho, y - rho)

    def G_prime(rho: float) -> float:
        z = x + rho
        l = y - rho
        nu_l = float(nu(z, l)) * (1.0 if abs(l) > eps else 0.0)
        return nu_l + _tail_integral(lambda r: nu.partial("x", z, r), l, eps, _INNER_TOL).value

    gp0 = nu_xy + tail_d1

    def bracket1(r_arr):
        r_arr = np.asarray(r_arr, dtype=float)
        vals = np.array([G(float(r)) for r in np.ravel(r_arr)]).reshape(r_arr.shape)
        return (vals - tail0 - r_arr * gp0) * nu_x(r_arr)

    t1_pos = integrate_interval(bracket1, r_c, eps, tol, rel_tol=REL_TOL)
    t1_neg = integrate_interval(bracket1, -eps, -r_c, tol, rel_tol=REL_TOL)
    err_accum += t1_pos.abs_error_estimate + t1_neg.abs_error_estimate

    def r_sq_nu(r):
        r = np.asarray(r, dtype=float)
        return r ** 2 * nu_x(r)

    moment2 = (integrate_interval(r_sq_nu, 0.0, r_c, tol / 10, rel_tol=1e-8).value
               + integrate_interval(r_sq_nu, -r_c, 0.0, tol / 10, rel_tol=1e-8).value)
    if moment2 != 0.0:
        delta = _FD_RHO * max(1.0, abs(y))
        gpp0 = (G_prime(delta) - G_prime(-delta)) / (2.0 * delta)
        term1 = t1_pos.value + t1_neg.value + 0.5 * gpp0 * moment2
        err_accum += 5.0 * r_c * moment2
    else:
        term1 = t1_pos.value + t1_neg.value

    # term 2: exact-width window, so only the difference form survives
    def s_times_h(r_arr):
        r_arr = np.asarray(r_arr, dtype=float)
        out = np.empty_like(r_arr)
        for i, r in enumerate(r_arr):
            r = float(r)

            def q(r1):
                r1 = np.asarray(r1, dtype=float)
                ind = np.abs(r1) > eps
                return np.where(ind, np.asarray(nu(x, r1), dtype=float), 0.0) \
                    * np.asarray(nu.bar(x + r1, r), dtype=float)

            qy = float(q(y))
            lo, hi = (y - r, y) if r >= 0 else (y, y - r)
            sign = 1.0 if r >= 0 else -1.0
            win = integrate_interval(lambda r1: q(r1) - qy, lo, hi,
                                     max(1e-15, 1e-13 * (hi - lo)), rel_tol=1e-11).value \
                if hi > lo else 0.0
            out[i] = sign * win * float(nu.h(r))
        return out

    t2_pos = integrate_interval(s_times_h, 0.0, eps, tol, rel_tol=REL_TOL)
    t2_neg = integrate_interval(s_times_h, -eps, 0.0, tol, rel_tol=REL_TOL)
    term2 = t2_pos.value + t2_neg.value
    err_accum += t2_pos.abs_error_estimate + t2_neg.abs_error_estimate

    # terms 3-5 (second jump intensity at the landed state x + r1)
    rate = _BigJumpRate(model, eps, tol / 10)

    def outer3(r1_arr):
        r1_arr = np.asarray(r1_arr, dtype=float)
        weights = np.asarray(nu_x(r1_arr), dtype=float)
        out = np.empty_like(r1_arr)
        for i, r1 in enumerate(r1_arr):
            z1 = x + float(r1)
            out[i] = _tail_integral(lambda r: nu(z1, r), y - float(r1), eps,
                                    _scaled_tol(weights[i])).value
        return out * weights

    t3 = integrate_punctured(outer3, eps, tol)

    def outer4(r1_arr):
        r1_arr = np.asarray(r1_arr, dtype=float)
        out = np.empty_like(r1_arr)
        for i, r1 in enumerate(r1_arr):
            out[i] = rate(x + float(r1))
        return out * nu_x(r1_arr)

    t4 = _tail_integral(outer4, y, eps, tol)
    term5 = -tail0 * rate(x)
    err_accum += t3.abs_error_estimate + t4.abs_error_estimate + tol / 10
    return term1 + term2 + t3.value - t4.value + term5, err_accum


def tail_expansion_identity_r(model: ModelSpec, trunc: TruncationConfig | None,
                              x: float, y: float, t: float,
                              tol: float = ABS_TOL) -> ExpansionResult:
    """Cheaper evaluation for gamma(x, r) = r: no inverse solves anywhere."""
    if not model.gamma.is_identity:
        raise ConfigurationError("tail_expansion_identity_r requires the identity transform")
    if t < 0:
        raise ValueError("t must be >= 0")
    if trunc is None:
        trunc = default_truncation(y)
    eps = trunc.eps
    if not (eps < y / 2.0 and y > eps):
        raise ConfigurationError(f"eps={eps} incompatible with y={y}")

    nu = model.nu
    p1_res = _tail_integral(lambda r: nu(x, r), y, eps, tol)

    nu_xy = float(nu(x, y))
    dnu2 = float(nu.partial("r", x, y))
    i1 = _tail_integral(lambda r: nu.partial("x", x, r), y, eps, tol / 4)
    i2 = _tail_integral(lambda r: nu.partial("xx", x, r), y, eps, tol / 4)
    u = x + y
    be_x = b_eps(model, trunc, x, tol=tol / 4)
    be_u = b_eps(model, trunc, u, tol=tol / 4)
    sig_x, sig_u = float(model.sigma(x)), float(model.sigma(u))
    d_val = (be_x * (nu_xy + i1.value)
             + 0.5 * sig_x ** 2 * (-dnu2 + i2.value)
             + (be_u - sig_u * float(model.sigma.deriv(1, u))) * nu_xy
             - 0.5 * sig_u ** 2 * dnu2)
    j_val, j_err = _j_term_identity_raw(model, eps, x, y, tol)
    p2 = d_val + j_val
    order1 = t * p1_res.value
    order2 = order1 + 0.5 * t * t * p2
    return ExpansionResult(
        p1=p1_res.value, d_term=d_val, j_term=j_val, p2=p2,
        quadrature_error=p1_res.abs_error_estimate + i1.abs_error_estimate
        + i2.abs_error_estimate + j_err + tol / 2,
        t=t, order1=order1, order2=order2,
        order2_clamped=min(1.0, max(0.0, order2)))


# ---------------------------------------------------------------------------
# sensitivity functionals (identity transform, constant coefficients)
# ---------------------------------------------------------------------------

def drift_sensitivity(model: ModelSpec, x: float, y: float, tol: float = ABS_TOL) -> float:
    """Coefficient of t^2 b / 2 in the tail probability for gamma(x,r)=r:

        2 nu(x, y) + integral_y^oo d_x nu(x, r) dr.
    """
    tail = integrate_semi_infinite(lambda r: model.nu.partial("x", x, r), y, tol)
    return 2.0 * float(model.nu(x, y)) + tail.value


def vol_sensitivity(model: ModelSpec, x: float, y: float, tol: float = ABS_TOL,
                    general_sigma: bool = False) -> float:
    """Coefficient of t^2 sigma^2 / 2 (constant sigma), or the general-sigma
    functional when ``general_sigma`` is set:

        -d_y nu(x, y) + 1/2 integral_y^oo d_x^2 nu(x, r) dr
        -d_y[nu(x,y) (sigma^2(x)+sigma^2(x+y))/2]
            + sigma^2(x)/2 integral_y^oo d_x^2 nu(x, r) dr.
    """
    tail = integrate_semi_infinite(lambda r: model.nu.partial("xx", x, r), y, tol)
    dnu2 = float(model.nu.partial("r", x, y))
    if not general_sigma:
        return -dnu2 + 0.5 * tail.value
    u = x + y
    sig_x, sig_u = float(model.sigma(x)), float(model.sigma(u))
    avg = 0.5 * (sig_x ** 2 + sig_u ** 2)
    prod_dy = dnu2 * avg + float(model.nu(x, y)) * sig_u * float(model.sigma.deriv(1, u))
    return -prod_dy + 0.5 * sig_x ** 2 * tail.value
