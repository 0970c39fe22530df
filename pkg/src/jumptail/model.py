"""State-dependent jump-diffusion model specification and checks.

A model is the quadruple (b, sigma, gamma, nu): drift, volatility, the
jump transform gamma(x, r) giving the displacement when mark r fires at
state x, and the state-dependent jump intensity nu(x, r) dominated by a
Levy density h.  Everything downstream (expansions, pricing, simulation)
consumes the immutable :class:`ModelSpec` built here.

All function wrappers evaluate on numpy arrays; derivatives fall back to
central differences when no analytic closure is supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, EvaluationError, JumptailError, RootFindError
from .quadrature import (QuadratureResult, integrate_interval,
                         integrate_punctured, integrate_semi_infinite)

ROOT_TOL = 1e-12
ROOT_MAX_ITER = 200

# Central-difference steps per derivative order, scaled by max(1, |x|).
_FD_STEPS = {1: 1e-5, 2: 1e-4, 3: 1e-3, 4: 5e-3}


def _fd(fn: Callable, n: int, x, scale=None):
    x = np.asarray(x, dtype=float)
    h = _FD_STEPS[n] * np.maximum(1.0, np.abs(x) if scale is None else np.abs(scale))
    if n == 1:
        return (fn(x + h) - fn(x - h)) / (2.0 * h)
    if n == 2:
        return (fn(x + h) - 2.0 * fn(x) + fn(x - h)) / h ** 2
    if n == 3:
        return (fn(x + 2 * h) - 2.0 * fn(x + h) + 2.0 * fn(x - h) - fn(x - 2 * h)) / (2.0 * h ** 3)
    if n == 4:
        return (fn(x + 2 * h) - 4.0 * fn(x + h) + 6.0 * fn(x) - 4.0 * fn(x - h) + fn(x - 2 * h)) / h ** 4
    raise ValueError(f"derivative order {n} not supported (max 4)")


@dataclass(frozen=True)
class SmoothField:
    """A scalar field x -> f(x) with derivative access up to order 4."""

    fn: Callable
    derivs: tuple = ()
    name: str = ""

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    @property
    def derivative_mode(self) -> str:
        return "analytic" if self.derivs else "finite-difference"

    def deriv(self, n: int, x):
        if not 1 <= n <= 4:
            raise ValueError("derivative order must be in 1..4")
        if n <= len(self.derivs) and self.derivs[n - 1] is not None:
            return self.derivs[n - 1](np.asarray(x, dtype=float))
        return _fd(self.fn, n, x)


def constant_field(value: float, name: str = "") -> SmoothField:
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return SmoothField(lambda x: np.full_like(np.asarray(x, dtype=float), value),
                       derivs=(zero, zero, zero, zero), name=name or f"const({value})")


@dataclass(frozen=True)
class JumpTransform:
    """The displacement gamma(x, r), strictly increasing in r, gamma(x,0)=0."""

    fn: Callable                       # gamma(x, r)
    d1: Optional[Callable] = None      # d gamma / dx
    d2: Optional[Callable] = None      # d gamma / dr
    d11: Optional[Callable] = None
    d22: Optional[Callable] = None
    d12: Optional[Callable] = None
    inverse_in_r: Optional[Callable] = None   # (x, y) -> r with gamma(x, r) = y
    is_identity: bool = False
    name: str = ""

    def __call__(self, x, r):
        return self.fn(np.asarray(x, dtype=float), np.asarray(r, dtype=float))

    def partial(self, which: str, x, r):
        """Partial derivative; ``which`` in {"x","r","xx","rr","xr"}."""
        x = np.asarray(x, dtype=float)
        r = np.asarray(r, dtype=float)
        analytic = {"x": self.d1, "r": self.d2, "xx": self.d11,
                    "rr": self.d22, "xr": self.d12}[which]
        if analytic is not None:
            return analytic(x, r)
        if which == "x":
            return _fd(lambda u: self.fn(u, r), 1, x)
        if which == "r":
            return _fd(lambda u: self.fn(x, u), 1, r, scale=np.maximum(1.0, np.abs(r)))
        if which == "xx":
            return _fd(lambda u: self.fn(u, r), 2, x)
        if which == "rr":
            return _fd(lambda u: self.fn(x, u), 2, r, scale=np.maximum(1.0, np.abs(r)))
        # mixed: difference the analytic-or-FD x-partial in r
        h = _FD_STEPS[1] * np.maximum(1.0, np.abs(r))
        return (self.partial("x", x, r + h) - self.partial("x", x, r - h)) / (2.0 * h)

    # -- inverse machinery -------------------------------------------------

    def inverse(self, x: float, y: float) -> float:
        """Solve gamma(x, r) = y for r (monotone increasing in r)."""
        if self.inverse_in_r is not None:
            return float(self.inverse_in_r(x, y))
        if y == 0.0:
            return 0.0
        return _bracketed_root(lambda r: float(self.fn(x, r)) - y, y)

    def inverse_vec(self, x: float, y):
        y = np.asarray(y, dtype=float)
        if self.inverse_in_r is not None:
            return np.asarray(self.inverse_in_r(x, y), dtype=float)
        return np.array([self.inverse(x, float(v)) for v in np.ravel(y)]).reshape(y.shape)

    def inverse_partials(self, x: float, y: float, r: float | None = None) -> dict:
        """First and second partials of the r-inverse at (x, y).

        Computed from gamma's own partials through the implicit-function
        identities, never by differencing the root-finder.
        """
        if r is None:
            r = self.inverse(x, y)
        g1 = float(self.partial("x", x, r))
        g2 = float(self.partial("r", x, r))
        g11 = float(self.partial("xx", x, r))
        g22 = float(self.partial("rr", x, r))
        g12 = float(self.partial("xr", x, r))
        d2 = 1.0 / g2
        d1 = -g1 / g2
        d22 = -g22 / g2 ** 3
        d12 = -(g12 + g22 * d1) / g2 ** 2
        d11 = -((g11 + g12 * d1) * g2 - g1 * (g12 + g22 * d1)) / g2 ** 2
        return {"r": r, "d1": d1, "d2": d2, "d11": d11, "d12": d12, "d22": d22}

    @classmethod
    def identity(cls) -> "JumpTransform":
        zero2 = lambda x, r: np.zeros(np.broadcast(x, r).shape)
        one2 = lambda x, r: np.ones(np.broadcast(x, r).shape)
        return cls(fn=lambda x, r: r * np.ones(np.broadcast(x, r).shape),
                   d1=zero2, d2=one2, d11=zero2, d22=zero2, d12=zero2,
                   inverse_in_r=lambda x, y: y * np.ones(np.broadcast(x, y).shape),
                   is_identity=True, name="identity")


def _bracketed_root(resid: Callable, target_scale: float,
                    lo: float = 0.0, hi: float | None = None) -> float:
    """Monotone root of ``resid`` by geometric bracket expansion + Brent.

    Starts from r=0 where resid(0) has the sign opposite to the target and
    expands geometrically in the appropriate direction.
    """
    f0 = resid(0.0)
    if f0 == 0.0:
        return 0.0
    direction = 1.0 if f0 < 0.0 else -1.0
    step = max(abs(target_scale), 1e-6)
    a, fa = 0.0, f0
    b = direction * step
    for _ in range(ROOT_MAX_ITER):
        fb = resid(b)
        if fa * fb <= 0.0:
            lo_, hi_ = (a, b) if a < b else (b, a)
            root = brentq(resid, lo_, hi_, xtol=1e-15, rtol=8.9e-16, maxiter=ROOT_MAX_ITER)
            if abs(resid(root)) > ROOT_TOL * max(1.0, abs(target_scale)):
                raise RootFindError(f"root residual above tolerance at r={root}")
            return float(root)
        a, fa = b, fb
        b *= 2.0
    raise RootFindError("bracket expansion exceeded its cap")


@dataclass(frozen=True)
class JumpIntensity:
    """State-dependent jump intensity nu(x, r) dominated by a Levy density h.

    ``alpha`` is the stability index of the small-jump behaviour:
    g(r) = h(r) |r|^(alpha+1) stays bounded away from 0 and infinity near
    the origin.  ``power_law`` marks the built-in family
    h(r) = exp(-temper |r|) |r|^(-1-alpha), which unlocks closed-form
    sampling and reparameterization shortcuts.
    """

    fn: Callable                        # nu(x, r)
    h: Callable                         # dominating density h(r)
    alpha: float
    d1: Optional[Callable] = None       # d nu / dx
    d11: Optional[Callable] = None
    d2: Optional[Callable] = None       # d nu / dr
    h_deriv: Optional[Callable] = None
    nu_bar: Optional[Callable] = None   # stable nu/h ratio, if available
    symmetric_h: bool = True
    power_law: Optional[tuple] = None   # (alpha, temper)
    separable_level: Optional[Callable] = None   # level(x) when nu = level(x) h(r)
    name: str = ""

    def __call__(self, x, r):
        return self.fn(np.asarray(x, dtype=float), np.asarray(r, dtype=float))

    def bar(self, x, r):
        """nu(x, r) / h(r), evaluated without forming huge intermediates."""
        x = np.asarray(x, dtype=float)
        r = np.asarray(r, dtype=float)
        if self.nu_bar is not None:
            return self.nu_bar(x, r)
        return self.fn(x, r) / self.h(r)

    def partial(self, which: str, x, r):
        x = np.asarray(x, dtype=float)
        r = np.asarray(r, dtype=float)
        analytic = {"x": self.d1, "xx": self.d11, "r": self.d2}[which]
        if analytic is not None:
            return analytic(x, r)
        if which == "x":
            return _fd(lambda u: self.fn(u, r), 1, x)
        if which == "xx":
            return _fd(lambda u: self.fn(u, r), 2, x)
        return _fd(lambda u: self.fn(x, u), 1, r, scale=np.maximum(1.0, np.abs(r)))

    def g(self, r):
        r = np.asarray(r, dtype=float)
        return self.h(r) * np.abs(r) ** (self.alpha + 1.0)


@dataclass(frozen=True)
class ModelSpec:
    b: SmoothField
    sigma: SmoothField
    gamma: JumpTransform
    nu: JumpIntensity
    label: str = ""


@dataclass(frozen=True)
class TruncationConfig:
    """Small/large jump split at |r| = eps with the sharp indicator."""

    eps: float
    kind: str = "sharp"

    def __post_init__(self):
        if self.eps <= 0:
            raise ConfigurationError("truncation eps must be > 0")
        if self.kind != "sharp":
            raise ConfigurationError(f"unsupported truncation kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    margin: float          # worst observed margin (positive = satisfied)
    witness: tuple         # point at which the margin is attained
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    eta: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> ConditionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "eta": self.eta,
            "all_passed": self.all_passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "margin": c.margin,
                 "witness": list(c.witness), "detail": c.detail}
                for c in self.checks
            ],
        }


DEFAULT_ETA = 1e-6


def default_x_grid() -> np.ndarray:
    return np.linspace(-5.0, 5.0, 41)


def default_r_grid() -> np.ndarray:
    mags = np.logspace(math.log10(1e-4), math.log10(5.0), 80)
    return np.concatenate([-mags[::-1], mags])


def _finite_or_raise(values: np.ndarray, xs, rs, what: str):
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = np.argwhere(bad)[0]
        point = (float(np.asarray(xs)[i[0]]) if np.ndim(xs) else float(xs),
                 float(np.asarray(rs)[i[-1]]) if rs is not None else None)
        raise EvaluationError(f"{what} returned a non-finite value", point=point)


def validate_assumptions(model: ModelSpec, x_grid: Sequence[float] | None = None,
                         r_grid: Sequence[float] | None = None,
                         eta: float = DEFAULT_ETA) -> ValidationReport:
    """Numerically check the standing model conditions on a grid.

    Lower-bound conditions report ``observed - eta`` margins; boundedness
    conditions report the observed sup (margin = cap is not meaningful, so
    they pass when every sample is finite).  Asymptotic small-r conditions
    are sampled on the near-origin part of the grid; a finite grid cannot
    certify the limits themselves.
    """
    xs = np.asarray(default_x_grid() if x_grid is None else x_grid, dtype=float)
    rs = np.asarray(default_r_grid() if r_grid is None else r_grid, dtype=float)
    if xs.size == 0 or rs.size == 0:
        raise ValueError("validation grids must be non-empty")
    if np.any(rs == 0.0):
        raise ValueError("r_grid must exclude 0")

    X = xs[:, None]
    R = rs[None, :]
    checks = []

    def add(name, passed, margin, witness, detail=""):
        checks.append(ConditionCheck(name, bool(passed), float(margin), witness, detail))

    def argmin_witness(arr2d):
        i, j = np.unravel_index(np.argmin(arr2d), arr2d.shape)
        return (float(xs[i]), float(rs[j]))

    nu_vals = model.nu(X, R)
    h_vals = model.nu.h(rs)
    _finite_or_raise(nu_vals, X, R, "nu")
    _finite_or_raise(np.asarray(h_vals), rs, None, "h")

    dom = h_vals[None, :] - nu_vals
    add("S1-i nu<=h", np.min(dom) >= -eta, np.min(dom), argmin_witness(dom))

    nbar = model.nu.bar(X, R)
    add("S1-ii nubar<=1", np.max(nbar) <= 1.0 + eta, 1.0 - np.max(nbar),
        argmin_witness(1.0 - nbar))
    near0 = np.abs(rs) <= np.quantile(np.abs(rs), 0.25)
    nbar_near0 = nbar[:, near0]
    i, j = np.unravel_index(np.argmin(nbar_near0), nbar_near0.shape)
    add("S1-ii liminf nubar>0", np.min(nbar_near0) > eta, np.min(nbar_near0) - eta,
        (float(xs[i]), float(rs[near0][j])), "sampled near r=0; limit not certified")
    r_dnbar = np.abs(R * _fd(lambda u: model.nu.bar(X, u), 1, R,
                             scale=np.maximum(1e-3, np.abs(R))))
    add("S1-ii |r d_r nubar| bounded", np.all(np.isfinite(r_dnbar)),
        float(np.max(r_dnbar)), argmin_witness(-r_dnbar), "margin reports observed sup")
    for order, label in ((1, "S1-ii |d_x nubar| bounded"), (2, "S1-ii |d_x^2 nubar| bounded")):
        d = np.abs(_fd(lambda u: model.nu.bar(u, R), order, X))
        add(label, np.all(np.isfinite(d)), float(np.max(d)), argmin_witness(-d),
            "margin reports observed sup")

    sig = model.sigma(xs)
    _finite_or_raise(sig, xs, None, "sigma")
    i = int(np.argmin(sig))
    add("S2-ii sigma>=eta", np.min(sig) >= eta, float(np.min(sig) - eta), (float(xs[i]), None))

    g0 = np.abs(model.gamma(xs, np.zeros_like(xs)))
    i = int(np.argmax(g0))
    add("S3-i gamma(x,0)=0", np.max(g0) <= 1e-12, float(-np.max(g0)), (float(xs[i]), 0.0))

    d2g = model.gamma.partial("r", X, R)
    add("S3-ii d_r gamma>eta", np.min(d2g) > eta, float(np.min(d2g) - eta), argmin_witness(d2g))

    one_p = np.abs(1.0 + model.gamma.partial("x", X, R))
    add("S3-iii |1+d_x gamma|>eta", np.min(one_p) > eta, float(np.min(one_p) - eta),
        argmin_witness(one_p))

    g_near = model.nu.g(rs[near0])
    i = int(np.argmin(g_near))
    add("S4 g bounded below", np.min(g_near) > eta, float(np.min(g_near) - eta),
        (None, float(rs[near0][i])), "sampled near r=0")
    add("S4 g bounded above", np.all(np.isfinite(g_near)), float(np.max(g_near)),
        (None, float(rs[near0][int(np.argmax(g_near))])), "margin reports observed sup")
    if model.nu.h_deriv is not None:
        gprime = np.abs(rs[near0]) * np.abs(
            model.nu.h_deriv(rs[near0]) * np.abs(rs[near0]) ** (model.nu.alpha + 1)
            + (model.nu.alpha + 1) * model.nu.h(rs[near0]) * np.abs(rs[near0]) ** model.nu.alpha
            * np.sign(rs[near0]))
    else:
        gprime = np.abs(rs[near0] * _fd(model.nu.g, 1, rs[near0],
                                        scale=np.maximum(1e-3, np.abs(rs[near0]))))
    add("S4 |r g'(r)| bounded", np.all(np.isfinite(gprime)), float(np.max(gprime)),
        (None, float(rs[near0][int(np.argmax(gprime))])), "margin reports observed sup")

    return ValidationReport(checks=tuple(checks), eta=eta)


# ---------------------------------------------------------------------------
# Thinning, inverses, truncation-derived quantities
# ---------------------------------------------------------------------------

def thinning_indicator(model: ModelSpec, x: float, r: float, u: float) -> int:
    """Accept (1) or reject (0) a candidate jump with mark u ~ U(0,1)."""
    if r == 0.0:
        raise ValueError("thinning requires r != 0")
    h = float(model.nu.h(np.asarray(r, dtype=float)))
    if h <= 0.0:
        raise ValueError(f"dominating density vanishes at r={r}")
    return int(u < float(model.nu.bar(x, r)))


def gamma_inverse(model: ModelSpec, x: float, y: float) -> float:
    return model.gamma.inverse(x, y)


def gamma_bar(model: ModelSpec, u: float, r: float) -> float:
    """Solve z + gamma(z, r) = u for the pre-jump state z."""
    if float(np.asarray(r)) == 0.0:
        return float(u)
    gam = model.gamma

    def resid(z):
        return z + float(gam.fn(np.asarray(z, dtype=float), np.asarray(r, dtype=float))) - u

    # Expand a bracket around the first-order guess z0 = u - gamma(u, r).
    z0 = u - float(gam.fn(np.asarray(u, dtype=float), np.asarray(r, dtype=float)))
    step = max(abs(u - z0), 1e-6)
    a = b = z0
    fa = fb = resid(z0)
    for _ in range(ROOT_MAX_ITER):
        if fa == 0.0:
            return float(a)
        if fa * fb < 0.0:
            break
        a, b = a - step, b + step
        fa, fb = resid(a), resid(b)
        if fa * fb > 0.0:
            step *= 2.0
    else:
        raise RootFindError("gamma_bar bracket expansion exceeded its cap")
    if fa * fb > 0.0:
        raise RootFindError("gamma_bar could not bracket a root")
    root = brentq(resid, a, b, xtol=1e-15, rtol=8.9e-16, maxiter=ROOT_MAX_ITER)
    if abs(resid(root)) > ROOT_TOL * max(1.0, abs(u)):
        raise RootFindError(f"gamma_bar residual above tolerance at z={root}")
    return float(root)


def lambda_eps(model: ModelSpec, trunc: TruncationConfig, tol: float = 1e-10) -> QuadratureResult:
    """Arrival rate of the dominating big-jump process: integral of h over |r|>eps."""
    return integrate_punctured(lambda r: model.nu.h(r), trunc.eps, tol)


def b_eps(model: ModelSpec, trunc: TruncationConfig, x: float, tol: float = 1e-10) -> float:
    """Compensated drift: b minus the retained small-|r| jump compensator."""
    if not 0.0 < trunc.eps < 1.0:
        raise ConfigurationError("b_eps needs eps in (0, 1)")
    x_arr = float(x)

    def integrand(r):
        r = np.asarray(r, dtype=float)
        return model.gamma(x_arr, r) * model.nu(x_arr, r)

    left = integrate_interval(integrand, -1.0, -trunc.eps, tol / 2)
    right = integrate_interval(integrand, trunc.eps, 1.0, tol / 2)
    return float(model.b(x)) - (left.value + right.value)


def sigma_hat_eps(model: ModelSpec, trunc: TruncationConfig, x: float,
                  tol: float = 1e-10) -> float:
    """Small-jump diffusion proxy: integral of gamma^2 nu over {|gamma| <= eps}."""
    lo = model.gamma.inverse(x, -trunc.eps)
    hi = model.gamma.inverse(x, trunc.eps)

    def integrand(r):
        r = np.asarray(r, dtype=float)
        return model.gamma(x, r) ** 2 * model.nu(x, r)

    out = 0.0
    if lo < 0.0:
        out += integrate_interval(integrand, lo, 0.0, tol / 2).value
    if hi > 0.0:
        out += integrate_interval(integrand, 0.0, hi, tol / 2).value
    return out


# ---------------------------------------------------------------------------
# Built-in models
# ---------------------------------------------------------------------------

_TWO_PI = 2.0 * math.pi


def _arctan_level(base: float, slope: float):
    """c(x) = base + slope * arctan(x) with analytic derivatives."""
    c = lambda x: base + slope * np.arctan(x)
    c1 = lambda x: slope / (1.0 + x ** 2)
    c2 = lambda x: -2.0 * slope * x / (1.0 + x ** 2) ** 2
    return c, c1, c2


def stable_like_intensity(alpha: float, temper: float = 0.0,
                          c_base: float = 0.75, c_slope: float = 1.0 / _TWO_PI,
                          name: str = "") -> JumpIntensity:
    """nu(x, r) = c(x) h(r) with h(r) = exp(-temper |r|) |r|^(-1-alpha)."""
    if not 0.0 < alpha < 2.0:
        raise ConfigurationError("alpha must lie in (0, 2)")
    c, c1, c2 = _arctan_level(c_base, c_slope)

    if temper == 0.0:
        def h(r):
            return np.abs(np.asarray(r, dtype=float)) ** (-1.0 - alpha)
    else:
        def h(r):
            a = np.abs(np.asarray(r, dtype=float))
            return np.exp(-temper * a) * a ** (-1.0 - alpha)

    def h_deriv(r):
        r = np.asarray(r, dtype=float)
        a = np.abs(r)
        return -np.sign(r) * np.exp(-temper * a) * (
            temper * a ** (-1.0 - alpha) + (1.0 + alpha) * a ** (-2.0 - alpha))

    return JumpIntensity(
        fn=lambda x, r: c(x) * h(r),
        h=h,
        alpha=alpha,
        d1=lambda x, r: c1(x) * h(r),
        d11=lambda x, r: c2(x) * h(r),
        d2=lambda x, r: c(x) * h_deriv(r),
        h_deriv=h_deriv,
        nu_bar=lambda x, r: c(x) * np.ones(np.broadcast(x, r).shape),
        symmetric_h=True,
        power_law=(alpha, temper),
        separable_level=c,
        name=name,
    )


def model_a() -> ModelSpec:
    """Sinusoidal drift/volatility with a pure power-law jump density."""
    b = SmoothField(np.sin, derivs=(np.cos, lambda x: -np.sin(x),
                                    lambda x: -np.cos(x), np.sin), name="sin")
    sigma = SmoothField(lambda x: 0.5 + 0.25 * np.sin(x),
                        derivs=(lambda x: 0.25 * np.cos(x),
                                lambda x: -0.25 * np.sin(x),
                                lambda x: -0.25 * np.cos(x),
                                lambda x: 0.25 * np.sin(x)),
                        name="0.5+0.25sin")
    return ModelSpec(b=b, sigma=sigma, gamma=JumpTransform.identity(),
                     nu=stable_like_intensity(1.01), label="modelA")


MODEL_B_SIGMA = 0.2
MODEL_B_TEMPER = 2.0


def model_b() -> ModelSpec:
    """Tempered power-law jumps, constant volatility, martingale drift.

    The pure power law has no exponential moments, so option-pricing demos
    use this tempered variant; the damping rate exceeds sup |d_r gamma| = 1,
    which keeps the pricing integrals finite.
    """
    from .sharemeasure import calibrate_drift   # deferred: avoids an import cycle

    sigma = constant_field(MODEL_B_SIGMA, name="const sigma")
    gamma = JumpTransform.identity()
    nu = stable_like_intensity(1.01, temper=MODEL_B_TEMPER, name="tempered")
    b = calibrate_drift(sigma, gamma, nu)
    return ModelSpec(b=b, sigma=sigma, gamma=gamma, nu=nu, label="modelB")


def model_from_description(desc) -> ModelSpec:
    """Build a model from a label or a structured description dict.

    Labels: ``"modelA"``, ``"modelB"``.  Dicts describe the built-in
    parametric family, e.g.::

        {"family": "stable_like", "alpha": 1.01, "temper": 2.0,
         "c_base": 0.75, "c_slope": 0.159155, "sigma": "const",
         "sigma_value": 0.2, "b": "martingale"}
    """
    if isinstance(desc, str):
        if desc == "modelA":
            return model_a()
        if desc == "modelB":
            return model_b()
        raise ConfigurationError(f"unknown model label {desc!r}")
    if not isinstance(desc, dict):
        raise ConfigurationError("model description must be a label or a dict")
    if desc.get("family", "stable_like") != "stable_like":
        raise ConfigurationError(f"unknown model family {desc.get('family')!r}")
    nu = stable_like_intensity(
        alpha=float(desc.get("alpha", 1.01)),
        temper=float(desc.get("temper", 0.0)),
        c_base=float(desc.get("c_base", 0.75)),
        c_slope=float(desc.get("c_slope", 1.0 / _TWO_PI)),
    )
    sig_kind = desc.get("sigma", "sinusoidal")
    if sig_kind == "const":
        sigma = constant_field(float(desc.get("sigma_value", 0.2)))
    elif sig_kind == "sinusoidal":
        sigma = SmoothField(lambda x: 0.5 + 0.25 * np.sin(x),
                            derivs=(lambda x: 0.25 * np.cos(x),
                                    lambda x: -0.25 * np.sin(x)))
    else:
        raise ConfigurationError(f"unknown sigma kind {sig_kind!r}")
    gamma = JumpTransform.identity()
    b_kind = desc.get("b", "sin")
    if b_kind == "sin":
        b = SmoothField(np.sin, derivs=(np.cos, lambda x: -np.sin(x)))
    elif b_kind == "const":
        b = constant_field(float(desc.get("b_value", 0.0)))
    elif b_kind == "martingale":
        from .sharemeasure import calibrate_drift
        b = calibrate_drift(sigma, gamma, nu)
    else:
        raise ConfigurationError(f"unknown drift kind {b_kind!r}")
    return ModelSpec(b=b, sigma=sigma, gamma=gamma, nu=nu,
                     label=str(desc.get("label", "custom")))
