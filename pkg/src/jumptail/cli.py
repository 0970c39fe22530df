"""Command-line front end.

Subcommands: ``validate``, ``compare``, ``price``, ``equivalence``.  A
single JSON config document drives everything; a few flags override its
top-level fields.  CSV output uses '.'-decimal, 17 significant digits,
fixed column order, so repeated runs with the same config are
byte-identical (including under JUMPTAIL_THREADS-parallel row fan-out).

Exit codes: 0 success, 1 check/threshold failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import equivalence, expansion, montecarlo, sharemeasure
from .errors import JumptailError, MomentConditionError
from .model import (ModelSpec, TruncationConfig, model_from_description,
                    validate_assumptions)

COMPARE_COLUMNS = ["t", "y", "eps", "p1_term", "p2_term", "order1", "order2",
                   "mc_est", "mc_se", "mc_ci_lo", "mc_ci_hi", "n_paths", "seed"]
PRICE_COLUMNS = ["k", "t", "first_term", "second_term", "total",
                 "leading_direct", "mc_price", "mc_se"]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _emit(path, text: str):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise _UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise _UsageError(f"config parse error in {path}: line {exc.lineno} "
                          f"col {exc.colno}: {exc.msg}")


class _UsageError(Exception):
    pass


def _build_model(cfg: dict) -> ModelSpec:
    if "model" not in cfg:
        raise _UsageError("config is missing the 'model' field")
    try:
        return model_from_description(cfg["model"])
    except JumptailError as exc:
        raise _UsageError(str(exc))


def _sim_config(cfg: dict, t: float, eps: float, seed_override) -> montecarlo.SimConfig:
    sim = dict(cfg.get("sim", {}))
    seed = int(seed_override if seed_override is not None else sim.get("seed", 0))
    return montecarlo.SimConfig(
        eps=float(sim.get("eps", eps)),
        n_steps=int(sim.get("n_steps", 100)),
        n_paths=int(sim.get("n_paths", 100_000)),
        horizon_t=float(t),
        seed=seed,
        antithetic=bool(sim.get("antithetic", False)))


def _thread_count() -> int:
    raw = os.environ.get("JUMPTAIL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    n = _thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def cmd_validate(cfg: dict, args) -> int:
    model = _build_model(cfg)
    report = validate_assumptions(model)
    doc = {"model": cfg["model"], "validation": report.as_dict()}
    ok = report.all_passed
    if args.check_s5:
        try:
            sharemeasure.check_exponential_moment(model.gamma, model.nu)
            doc["s5"] = {"passed": True}
        except MomentConditionError as exc:
            doc["s5"] = {"passed": False, "detail": str(exc)}
            ok = False
    _emit(args.out, json.dumps(doc, indent=2) + "\n")
    return 0 if ok else 1


def cmd_compare(cfg: dict, args) -> int:
    model = _build_model(cfg)
    x0 = float(cfg.get("x0", 0.0))
    t_grid = [float(v) for v in cfg.get("t_grid", [0.1])]
    y_grid = [float(v) for v in cfg.get("y_grid", [1.0])]
    eps_list = [float(v) for v in cfg.get("eps_list", [0.01])]
    if args.eps is not None:
        eps_list = [float(args.eps)]
    with_mc = bool(cfg.get("compare", {}).get("with_mc", True))
    grid = [(t, y, e) for t in t_grid for y in y_grid for e in eps_list]

    coeff_cache: dict = {}

    def coefficients(y: float, eps: float):
        key = (y, eps)
        if key not in coeff_cache:
            res = expansion.tail_expansion(model, TruncationConfig(eps), x0, y, 0.0)
            coeff_cache[key] = (res.p1, res.p2)
        return coeff_cache[key]

    def one_row(point):
        t, y, e = point
        row = {"t": t, "y": y, "eps": e}
        try:
            p1v, p2v = coefficients(y, e)
            row["p1_term"] = p1v
            row["p2_term"] = p2v
            row["order1"] = t * p1v
            row["order2"] = t * p1v + 0.5 * t * t * p2v
            if with_mc and t > 0:
                sim = _sim_config(cfg, t, e, args.seed)
                est = montecarlo.estimate_tail(model, sim, x0, y)
                row.update(mc_est=est.p_hat, mc_se=est.std_err,
                           mc_ci_lo=est.ci95[0], mc_ci_hi=est.ci95[1],
                           n_paths=est.n_paths, seed=est.seed)
            else:
                sim = _sim_config(cfg, max(t, 1e-12), e, args.seed)
                row.update(mc_est=0.0 if t == 0 else math.nan, mc_se=0.0,
                           mc_ci_lo=0.0, mc_ci_hi=0.0,
                           n_paths=0, seed=sim.seed)
        except JumptailError as exc:
            if not args.keep_going:
                raise
            print(f"row {point}: {exc}", file=sys.stderr)
            for col in COMPARE_COLUMNS[3:11]:
                row[col] = math.nan
            row.update(n_paths=0, seed=int(args.seed or 0))
        return row

    # Expansion coefficients are shared across t; warm the cache serially so
    # threaded rows only run their Monte Carlo part.
    for (y, e) in {(y, e) for (_, y, e) in grid}:
        try:
            coefficients(y, e)
        except JumptailError:
            if not args.keep_going:
                raise
    rows = _map_ordered(one_row, grid)
    lines = [",".join(COMPARE_COLUMNS)]
    lines += [",".join(_fmt(row[c]) for c in COMPARE_COLUMNS) for row in rows]
    _emit(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_price(cfg: dict, args) -> int:
    model = _build_model(cfg)
    price_cfg = cfg.get("price", {})
    s0 = float(price_cfg.get("s0", 1.0))
    k_grid = [float(v) for v in cfg.get("k_grid", [0.3])]
    t_grid = [float(v) for v in price_cfg.get("t_grid", cfg.get("t_grid", [0.05]))]
    with_mc = bool(price_cfg.get("with_mc", False))

    # gates run once up front so failures precede any output
    sharemeasure.check_exponential_moment(model.gamma, model.nu)
    sharemeasure._martingale_gate(model)

    coeff_cache: dict = {}

    def coefficients(k: float):
        if k not in coeff_cache:
            opt = sharemeasure.otm_price_expansion(model, s0, k, 1.0,
                                                   check_martingale=False)
            coeff_cache[k] = opt
        return coeff_cache[k]

    def one_row(point):
        k, t = point
        opt = coefficients(k)
        ek = math.exp(k)
        first = t * s0 * (opt.p1_sharp - ek * opt.p1_plain)
        second = 0.5 * t * t * s0 * (opt.p2_sharp - ek * opt.p2_plain)
        row = {"k": k, "t": t, "first_term": first, "second_term": second,
               "total": first + second,
               "leading_direct": sharemeasure.leading_term_direct(model, s0, k, t)}
        if with_mc and t > 0:
            sim = _sim_config(cfg, t, 0.01, args.seed)
            est = montecarlo.estimate_option(model, sim, s0, k)
            row.update(mc_price=est.price, mc_se=est.std_err)
        else:
            row.update(mc_price=math.nan, mc_se=math.nan)
        return row

    grid = [(k, t) for k in k_grid for t in t_grid]
    for k in k_grid:
        coefficients(k)
    rows = _map_ordered(one_row, grid)
    lines = [",".join(PRICE_COLUMNS)]
    lines += [",".join(_fmt(row[c]) for c in PRICE_COLUMNS) for row in rows]
    _emit(args.out, "\n".join(lines) + "\n")
    return 0


def _interval_family(eps: float, n: int = 20):
    """Nested log-spaced test intervals inside (0, eps), mirrored to r < 0."""
    edges = eps * 0.999 * (0.75 ** np.arange(n // 2 + 1))
    out = []
    for i in range(n // 2):
        a, b = float(edges[i + 1]), float(edges[i])
        out.append((a, b))
        out.append((-b, -a))
    return out


def cmd_equivalence(cfg: dict, args) -> int:
    model = _build_model(cfg)
    eq_cfg = cfg.get("equivalence", {})
    eps = float(args.eps if args.eps is not None else eq_cfg.get("eps", 0.1))
    threshold = float(eq_cfg.get("threshold", 1e-7))
    n_intervals = int(eq_cfg.get("n_intervals", 20))
    n_x = int(eq_cfg.get("x_points", 11))
    ctx = equivalence.ReparamContext(model, eps)
    xs = np.linspace(-2.0, 2.0, n_x)
    intervals = _interval_family(eps, n_intervals)

    def kernel_err(x):
        return max(equivalence.kernel_equivalence_error(ctx, float(x), a, b)
                   for (a, b) in intervals)

    errors = _map_ordered(kernel_err, list(xs))
    max_err = max(errors)
    ws = eps * np.array([-0.8, -0.4, -0.1, 0.1, 0.4, 0.8])
    bounds = equivalence.delta_bound_check(ctx, xs[:: max(1, n_x // 5)], ws)
    doc = {
        "eps": eps,
        "threshold": threshold,
        "max_kernel_error": max_err,
        "kernel_errors": {f"{x:.6g}": e for x, e in zip(xs, errors)},
        "delta_bounds": bounds.as_dict(),
    }
    ok = max_err <= threshold and bounds.diffeomorphism_margin_ok
    _emit(args.out, json.dumps(doc, indent=2) + "\n")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumptail",
        description="Short-time tail/option expansions and Monte Carlo for "
                    "state-dependent jump-diffusions")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in [("validate", cmd_validate), ("compare", cmd_compare),
                     ("price", cmd_price), ("equivalence", cmd_equivalence)]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--keep-going", action="store_true")
        p.add_argument("--check-s5", action="store_true")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = _load_config(args.config)
        return args.fn(cfg, args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MomentConditionError as exc:
        print(f"moment condition failure: {exc}", file=sys.stderr)
        return 1
    except JumptailError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
