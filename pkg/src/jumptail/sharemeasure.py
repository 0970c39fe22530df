"""Martingale calibration, the stock-numeraire measure change, and the
second-order OTM call-price expansion.

With zero rates, pricing an out-of-the-money call reduces to two tail
probabilities: one under the pricing measure and one under the "share"
measure that uses the stock itself as numeraire.  Under the share measure
the process keeps the same generator shape with

    nu#(x, r) = exp(gamma(x, r)) nu(x, r)

and a drift b# fixed by the martingale restriction, so the tail expansion
machinery applies verbatim to the transformed model.  The exponential
tilt requires the jump density to have exponential moments; every entry
point here checks that first and raises :class:`MomentConditionError`
when the relevant integral diverges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CalibrationError, DivergenceError, MomentConditionError
from .model import (JumpIntensity, JumpTransform, ModelSpec, SmoothField,
                    TruncationConfig, default_r_grid, default_x_grid)
from .quadrature import (integrate_dyadic_tail, integrate_interval,
                         integrate_semi_infinite)
from . import expansion

RESIDUAL_GATE = 1e-6          # sup-norm threshold before pricing is allowed
_CAL_TOL = 1e-12              # quadrature tolerance inside calibration
_GATE_GRID = np.linspace(-2.0, 2.0, 9)


def _tilt(g, val):
    """exp(g) * val without the inf * 0 trap when both factors are extreme."""
    g = np.asarray(g, dtype=float)
    val = np.asarray(val, dtype=float)
    out = np.zeros(np.broadcast(g, val).shape)
    g, val = np.broadcast_arrays(g, val)
    mask = val != 0.0
    if np.any(mask):
        out[mask] = np.sign(val[mask]) * np.exp(g[mask] + np.log(np.abs(val[mask])))
    return out


def exponent_bound(gamma: JumpTransform) -> float:
    """Upper bound c >= sup |d_r gamma|, exact for the identity transform."""
    if gamma.is_identity:
        return 1.0
    X = default_x_grid()[:, None]
    R = default_r_grid()[None, :]
    return 1.1 * float(np.max(np.abs(gamma.partial("r", X, R))))


def check_exponential_moment(gamma: JumpTransform, nu: JumpIntensity,
                             tol: float = 1e-9) -> float:
    """Verify integral of exp(c r) g(r) over r >= 1 converges; return it.

    Divergence (detected on growing dyadic blocks) raises
    :class:`MomentConditionError`.
    """
    c = exponent_bound(gamma)

    def integrand(r):
        r = np.asarray(r, dtype=float)
        return np.exp(c * r) * nu.g(r)

    try:
        return integrate_dyadic_tail(integrand, 1.0, tol).value
    except DivergenceError as exc:
        raise MomentConditionError(
            f"exponential moment integral diverges (c={c:.4g}): {exc}") from exc


def _compensated_exp_integral(gamma: JumpTransform, nu: JumpIntensity, x: float,
                              tol: float = _CAL_TOL, tilted: bool = False) -> float:
    """integral of (e^g - 1 - 1_{|r|<=1} g) nu dr, or the share-measure
    variant (e^g - 1 - 1_{|r|<=1} g e^g) nu dr when ``tilted``."""

    def core(r):
        r = np.asarray(r, dtype=float)
        g = np.asarray(gamma(x, r), dtype=float)
        if tilted:
            val = np.expm1(g) - g * np.exp(g)
        else:
            val = np.expm1(g) - g
        return val * np.asarray(nu(x, r), dtype=float)

    def tail(r):
        r = np.asarray(r, dtype=float)
        g = np.asarray(gamma(x, r), dtype=float)
        n = np.asarray(nu(x, r), dtype=float)
        return _tilt(g, n) - n

    inner = integrate_interval(core, -1.0, 0.0, tol / 4).value \
        + integrate_interval(core, 0.0, 1.0, tol / 4).value
    right = integrate_dyadic_tail(tail, 1.0, tol / 4).value
    left = integrate_semi_infinite(lambda s: tail(-s), 1.0, tol / 4).value
    return inner + right + left


def martingale_residual(model: ModelSpec, x: float, tol: float = 1e-10) -> float:
    """b(x) + sigma^2(x)/2 + integral (e^gamma - 1 - 1_{|r|<=1} gamma) nu dr.

    Zero (to tolerance) iff the discounted stock is a martingale at x.
    """
    check_exponential_moment(model.gamma, model.nu)
    return float(model.b(x)) + 0.5 * float(model.sigma(x)) ** 2 \
        + _compensated_exp_integral(model.gamma, model.nu, x, tol)


class _MemoizedScalarField:
    """Pointwise-expensive field with a write-once value cache."""

    def __init__(self, scalar_fn):
        self._fn = scalar_fn
        self._cache: dict = {}

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.ravel(x)
        out = np.empty(flat.shape)
        for i, v in enumerate(flat):
            key = float(v)
            got = self._cache.get(key)
            if got is None:
                got = self._fn(key)
                self._cache[key] = got
            out[i] = got
        return out.reshape(x.shape) if x.shape else float(out[0])


def calibrate_drift(sigma: SmoothField, gamma: JumpTransform,
                    nu: JumpIntensity) -> SmoothField:
    """The unique drift making exp(X) a martingale:

        b(x) = -sigma^2(x)/2 - integral (e^gamma - 1 - 1_{|r|<=1} gamma) nu dr.

    Values are produced lazily by quadrature and memoized per x; derivatives
    come from central differences of the memoized values.
    """
    check_exponential_moment(gamma, nu)

    def scalar(x: float) -> float:
        return -0.5 * float(sigma(x)) ** 2 \
            - _compensated_exp_integral(gamma, nu, x, _CAL_TOL)

    return SmoothField(fn=_MemoizedScalarField(scalar), name="martingale drift")


def share_drift(model: ModelSpec, x: float, tol: float = _CAL_TOL) -> float:
    """Share-measure drift from the post-martingale-condition form."""
    return 0.5 * float(model.sigma(x)) ** 2 \
        - _compensated_exp_integral(model.gamma, model.nu, x, tol, tilted=True)


def share_drift_pre_form(model: ModelSpec, x: float, tol: float = _CAL_TOL) -> float:
    """Share-measure drift straight from the generator identification:

        b + sigma^2 + integral 1_{|r|<=1} gamma (e^gamma - 1) nu dr.

    Differs from :func:`share_drift` by exactly the martingale residual.
    """
    gamma, nu = model.gamma, model.nu

    def core(r):
        r = np.asarray(r, dtype=float)
        g = np.asarray(gamma(x, r), dtype=float)
        return g * np.expm1(g) * np.asarray(nu(x, r), dtype=float)

    integral = integrate_interval(core, -1.0, 0.0, tol / 2).value \
        + integrate_interval(core, 0.0, 1.0, tol / 2).value
    return float(model.b(x)) + float(model.sigma(x)) ** 2 + integral


def share_transform(model: ModelSpec) -> ModelSpec:
    """The model seen under the stock-numeraire measure.

    Jumps are exponentially tilted, the drift follows from the martingale
    condition, and the dominating density picks up the worst-case tilt
    exp(c r) with c >= sup |d_r gamma| so the thinning construction stays
    valid.
    """
    check_exponential_moment(model.gamma, model.nu)
    gamma, nu = model.gamma, model.nu
    c = exponent_bound(gamma)

    def _g(x, r):
        return np.asarray(gamma(x, r), dtype=float)

    def nu_sharp(x, r):
        return _tilt(_g(x, r), nu(x, r))

    def d1_sharp(x, r):
        return _tilt(_g(x, r),
                     np.asarray(gamma.partial("x", x, r), dtype=float)
                     * np.asarray(nu(x, r), dtype=float)
                     + np.asarray(nu.partial("x", x, r), dtype=float))

    def d11_sharp(x, r):
        g1 = np.asarray(gamma.partial("x", x, r), dtype=float)
        g11 = np.asarray(gamma.partial("xx", x, r), dtype=float)
        n = np.asarray(nu(x, r), dtype=float)
        n1 = np.asarray(nu.partial("x", x, r), dtype=float)
        n11 = np.asarray(nu.partial("xx", x, r), dtype=float)
        return _tilt(_g(x, r), (g1 ** 2 + g11) * n + 2.0 * g1 * n1 + n11)

    def d2_sharp(x, r):
        return _tilt(_g(x, r),
                     np.asarray(gamma.partial("r", x, r), dtype=float)
                     * np.asarray(nu(x, r), dtype=float)
                     + np.asarray(nu.partial("r", x, r), dtype=float))

    def h_sharp(r):
        r = np.asarray(r, dtype=float)
        return _tilt(c * r, nu.h(r))

    def nu_bar_sharp(x, r):
        r = np.asarray(r, dtype=float)
        g = np.asarray(gamma(x, r), dtype=float)
        return _tilt(g - c * r, nu.bar(x, r))

    h_deriv = None
    if nu.h_deriv is not None:
        h_deriv = lambda r: _tilt(
            c * np.asarray(r, dtype=float),
            c * np.asarray(nu.h(r), dtype=float) + np.asarray(nu.h_deriv(r), dtype=float))

    # gamma = r tilts nu and h by the same exponential, so separability of
    # the base intensity survives the measure change
    level_sharp = nu.separable_level if (gamma.is_identity
                                         and nu.separable_level is not None) else None
    nu_new = JumpIntensity(
        fn=nu_sharp, h=h_sharp, alpha=nu.alpha,
        d1=d1_sharp, d11=d11_sharp, d2=d2_sharp,
        h_deriv=h_deriv, nu_bar=nu_bar_sharp,
        symmetric_h=False, power_law=None,
        separable_level=level_sharp,
        name=(nu.name + "#") if nu.name else "tilted")
    b_new = SmoothField(fn=_MemoizedScalarField(lambda x: share_drift(model, x)),
                        name="share drift")
    return ModelSpec(b=b_new, sigma=model.sigma, gamma=gamma, nu=nu_new,
                     label=(model.label + "#") if model.label else "share")


@dataclass(frozen=True)
class OptionExpansion:
    s0: float
    k: float
    t: float
    first_term: float
    second_term: float
    total: float
    p1_plain: float
    p2_plain: float
    p1_sharp: float
    p2_sharp: float


def _martingale_gate(model: ModelSpec, grid=None):
    xs = _GATE_GRID if grid is None else np.asarray(grid, dtype=float)
    worst = max(abs(martingale_residual(model, float(v))) for v in xs)
    if worst > RESIDUAL_GATE:
        raise CalibrationError(
            f"martingale residual {worst:.3e} exceeds the {RESIDUAL_GATE:.0e} gate; "
            "calibrate the drift before pricing")
    return worst


def otm_price_expansion(model: ModelSpec, s0: float, k: float, t: float,
                        trunc: Optional[TruncationConfig] = None,
                        tol: float = expansion.ABS_TOL,
                        check_martingale: bool = True) -> OptionExpansion:
    """Second-order short-maturity expansion of an OTM call price.

    first  = t   * s0 * (P1#(0,k) - e^k P1(0,k))
    second = t^2/2 * s0 * (P2#(0,k) - e^k P2(0,k))
    """
    if k <= 0:
        raise ValueError("log-moneyness k must be > 0 (OTM call)")
    if check_martingale:
        _martingale_gate(model)
    if trunc is None:
        trunc = expansion.default_truncation(k)
    plain = expansion.tail_expansion(model, trunc, 0.0, k, t, tol)
    sharp = expansion.tail_expansion(share_transform(model), trunc, 0.0, k, t, tol)
    ek = math.exp(k)
    first = t * s0 * (sharp.p1 - ek * plain.p1)
    second = 0.5 * t * t * s0 * (sharp.p2 - ek * plain.p2)
    return OptionExpansion(s0=s0, k=k, t=t, first_term=first, second_term=second,
                           total=first + second,
                           p1_plain=plain.p1, p2_plain=plain.p2,
                           p1_sharp=sharp.p1, p2_sharp=sharp.p2)


def leading_term_direct(model: ModelSpec, s0: float, k: float, t: float,
                        tol: float = 1e-11) -> float:
    """t * s0 * integral of (e^gamma(0,r) - e^k)_+ nu(0, r) dr.

    Single quadrature over the marks whose displacement clears k; the
    independent cross-check for the first expansion term.
    """
    if k <= 0:
        raise ValueError("k must be > 0")
    rk = model.gamma.inverse(0.0, k)
    ek = math.exp(k)

    def integrand(r):
        r = np.asarray(r, dtype=float)
        g = np.asarray(model.gamma(0.0, r), dtype=float)
        n = np.asarray(model.nu(0.0, r), dtype=float)
        return np.maximum(_tilt(g, n) - ek * n, 0.0)

    try:
        val = integrate_dyadic_tail(integrand, rk, tol).value
    except DivergenceError as exc:
        raise MomentConditionError(
            "payoff integral diverges; the model has no exponential moments") from exc
    return t * s0 * val


def implied_intensity_from_curvature(c_kk: float, t: float, kappa: float) -> float:
    """Invert the leading-order strike curvature into a jump intensity.

    With S0 normalized to 1 and K = e^kappa, the short-maturity call
    curvature in strike is approximately t e^(-kappa) nu(0, kappa).
    """
    if t <= 0:
        raise ValueError("t must be > 0")
    return math.exp(kappa) * c_kk / t


def vol_effect_on_price(model: ModelSpec, s0: float, k: float,
                        tol: float = 1e-11) -> float:
    """Coefficient of t^2 sigma^2/2 in the OTM price (identity transform):

        e^k nu(0,k) + int_k^oo (e^r+e^k)/2 d_x nu dr
                    + int_k^oo (e^r-e^k)/2 d_x^2 nu dr,  all at x = 0.
    """
    if not model.gamma.is_identity:
        raise CalibrationError("vol_effect_on_price assumes the identity transform")
    ek = math.exp(k)
    nu = model.nu

    def f1(r):
        r = np.asarray(r, dtype=float)
        return 0.5 * (np.exp(r) + ek) * np.asarray(nu.partial("x", 0.0, r), dtype=float)

    def f2(r):
        r = np.asarray(r, dtype=float)
        return 0.5 * (np.exp(r) - ek) * np.asarray(nu.partial("xx", 0.0, r), dtype=float)

    try:
        i1 = integrate_dyadic_tail(f1, k, tol).value
        i2 = integrate_dyadic_tail(f2, k, tol).value
    except DivergenceError as exc:
        raise MomentConditionError("sensitivity tails diverge without "
                                   "exponential moments") from exc
    return s0 * (ek * float(nu(0.0, k)) + i1 + i2)
