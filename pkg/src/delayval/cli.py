"""Batch command-line front-end.

Subcommands: price, mc-check, spectrum, mean-path, laplace-check,
simulate.  Every command loads and schema-validates a JSON config, runs
the requested computation and writes deterministic output: rerunning
with the same config and seed reproduces the bytes exactly, regardless
of thread count.  Numbers are serialized with 17 significant digits.

Exit codes: 0 ok; 2 positivity gate failed; 3 config/schema error;
4 Monte Carlo z-score breach.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from ._backend import BACKEND
from .config import RunConfig, SchemaError, load_config
from .income import PositivityError, char_function, check_positivity, spectral_bound
from .simulation import martingale_check, mc_human_capital, simulate_income
from .valuation import human_capital_poisson, laplace_transform_check, mean_path

EXIT_OK = 0
EXIT_GATE = 2
EXIT_SCHEMA = 3
EXIT_ZSCORE = 4


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _json_dumps(obj, indent: int = 0) -> str:
    """json.dumps with floats at 17 significant digits and stable key order."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = ",\n".join(f'{pad}  "{k}": {_json_dumps(v, indent + 2).lstrip()}'
                           for k, v in obj.items())
        return f"{pad}{{\n{items}\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        items = ", ".join(_json_dumps(v).lstrip() for v in obj)
        return f"{pad}[{items}]"
    if isinstance(obj, bool):
        return pad + ("true" if obj else "false")
    if obj is None:
        return pad + "null"
    if isinstance(obj, float):
        return pad + _fmt(obj)
    if isinstance(obj, int):
        return pad + str(obj)
    return pad + '"' + str(obj) + '"'


class _Out:
    """Writes either to a file (--output) or stdout."""

    def __init__(self, path: str | None):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()
        return False


def _emit_record(record: dict, out_path: str | None) -> None:
    with _Out(out_path) as fh:
        fh.write(_json_dumps(record) + "\n")


def _csv_rows(fh, header: list[str], rows) -> None:
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(_fmt(v) for v in row) + "\n")


def _gate_failure(rc: RunConfig, out_path: str | None) -> int:
    report = check_positivity(rc.income, rc.market, rc.exit_intensity)
    _emit_record({
        "error": "positivity_gate",
        "measure_nonnegative": report.measure_nonnegative,
        "spread_positive": report.spread_positive,
        "spread": report.spread,
    }, out_path)
    return EXIT_GATE


# -- commands ---------------------------------------------------------------


def cmd_price(rc: RunConfig, args) -> int:
    try:
        result = human_capital_poisson(rc.income, rc.market, rc.history,
                                       rc.exit_intensity)
    except PositivityError:
        return _gate_failure(rc, args.output)
    lam0 = spectral_bound(rc.income, rc.market)
    spread = 1.0 / result.annuity_factor
    with _Out(args.output) as fh:
        _csv_rows(fh, ["K", "lambda0", "present_term", "past_term", "total"],
                  [(spread, lam0, result.present_term, result.past_term, result.total)])
    return EXIT_OK


def cmd_mc_check(rc: RunConfig, args) -> int:
    try:
        closed = human_capital_poisson(rc.income, rc.market, rc.history,
                                       rc.exit_intensity)
        headline = mc_human_capital(rc.income, rc.market, rc.history, rc.sim,
                                    rc.exit_intensity)
        other_cfg = replace(rc.sim, measure=(
            "physical" if rc.sim.measure == "risk_neutral" else "risk_neutral"))
        other = mc_human_capital(rc.income, rc.market, rc.history, other_cfg,
                                 rc.exit_intensity)
    except PositivityError:
        return _gate_failure(rc, args.output)
    z = (headline.value - closed.total) / headline.std_error
    z_between = ((headline.value - other.value)
                 / np.hypot(headline.std_error, other.std_error))
    _emit_record({
        "closed_form": closed.total,
        "measure": headline.measure,
        "mc_value": headline.value,
        "mc_std_error": headline.std_error,
        "z_vs_closed": z,
        "other_measure": other.measure,
        "other_value": other.value,
        "other_std_error": other.std_error,
        "z_between_measures": z_between,
        "n_paths": headline.n_paths,
        "T": headline.horizon,
        "tail_bound": headline.truncation_tail_bound,
        "dt": headline.dt,
        "seed": rc.sim.seed,
    }, args.output)
    return EXIT_ZSCORE if abs(z) > 4.0 else EXIT_OK


def cmd_spectrum(rc: RunConfig, args) -> int:
    lam_grid = np.linspace(args.lambda_min, args.lambda_max, args.points)
    k_vals = [char_function(rc.income, rc.market, lam) for lam in lam_grid]
    phi_ra = rc.income.risk_adjusted_measure(rc.market)
    lam0 = spectral_bound(rc.income, rc.market) if phi_ra.is_nonnegative() else float("nan")
    with _Out(args.output) as fh:
        fh.write(f"# lambda0 = {_fmt(lam0)}\n")
        _csv_rows(fh, ["lambda", "K"], zip(lam_grid.tolist(), k_vals))
    return EXIT_OK


def cmd_mean_path(rc: RunConfig, args) -> int:
    horizon = args.horizon if args.horizon is not None else rc.sim.horizon
    if horizon is None:
        print("mean-path needs --horizon (or simulation.horizon in the config)",
              file=sys.stderr)
        return EXIT_SCHEMA
    t, m = mean_path(rc.income, rc.market, rc.history, horizon, dt=rc.sim.dt)
    with _Out(args.output) as fh:
        _csv_rows(fh, ["t", "M0"], zip(t.tolist(), m.tolist()))
    return EXIT_OK


def cmd_laplace_check(rc: RunConfig, args) -> int:
    lam = args.lam if args.lam is not None else rc.market.r
    res = laplace_transform_check(rc.income, rc.market, rc.history, lam,
                                  dt=args.laplace_dt, t_max=args.t_max)
    _emit_record({
        "lambda": res.lam,
        "lhs": res.lhs,
        "rhs": res.rhs,
        "gap": res.gap,
        "dt": res.dt,
        "T_max": res.t_max,
        "euler_budget": res.euler_budget,
        "tail_bound": res.tail_bound,
    }, args.output)
    return EXIT_OK


def cmd_simulate(rc: RunConfig, args) -> int:
    sim = rc.sim if rc.sim.horizon is not None else replace(rc.sim, horizon=2.0 * rc.income.d)
    paths = simulate_income(rc.income, rc.market, rc.history, sim)
    if args.dump:
        with _Out(args.output) as fh:
            rows = ((p, paths.t[k], paths.x[p, k], paths.xi[p, k])
                    for p in range(paths.x.shape[0])
                    for k in range(paths.t.size))
            _csv_rows(fh, ["path", "t", "X0", "xi"], rows)
        return EXIT_OK
    mart = martingale_check(rc.income, rc.market, rc.history, sim)
    _emit_record({
        "measure": paths.measure,
        "n_paths": int(paths.x.shape[0]),
        "horizon": sim.horizon,
        "dt": sim.dt,
        "seed": sim.seed,
        "final_mean": float(np.mean(paths.x[:, -1])),
        "final_std": float(np.std(paths.x[:, -1], ddof=1)),
        "min_value": float(np.min(paths.x)),
        "martingale_z": mart.zscore,
    }, args.output)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delayval",
        description="Price delayed-income streams: closed form, delay-ODE "
                    "oracles and Monte Carlo cross-checks.",
    )
    parser.add_argument("--backend-info", action="store_true",
                        help="print the active kernel backend and exit")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--paths", type=int, default=None, dest="n_paths")
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--horizon", type=float, default=None)
        p.add_argument("--delta", type=float, default=None, dest="exit_intensity",
                       help="Poisson exit intensity added to the discount rate")
        p.add_argument("--threads", type=int, default=None, dest="n_threads")
        p.add_argument("--measure", choices=["physical", "risk_neutral"], default=None)
        p.add_argument("--antithetic", action="store_true", default=None)
        p.add_argument("--output", default=None, help="write output here instead of stdout")

    p = sub.add_parser("price", help="closed-form valuation record (CSV row)")
    common(p)
    p = sub.add_parser("mc-check", help="closed form vs Monte Carlo, both measures")
    common(p)
    p = sub.add_parser("spectrum", help="characteristic function on a grid plus its root")
    common(p)
    p.add_argument("--lambda-min", type=float, default=None)
    p.add_argument("--lambda-max", type=float, default=None)
    p.add_argument("--points", type=int, default=101)
    p = sub.add_parser("mean-path", help="deterministic conditional-mean path (CSV)")
    common(p)
    p = sub.add_parser("laplace-check", help="Laplace-transform consistency record")
    common(p)
    p.add_argument("--lam", type=float, default=None,
                   help="transform abscissa (default: the riskless rate)")
    p.add_argument("--laplace-dt", type=float, default=1e-3)
    p.add_argument("--t-max", type=float, default=None)
    p = sub.add_parser("simulate", help="simulate paths; --dump writes (path,t,X0,xi) CSV")
    common(p)
    p.add_argument("--dump", action="store_true")
    return parser


_COMMANDS = {
    "price": cmd_price,
    "mc-check": cmd_mc_check,
    "spectrum": cmd_spectrum,
    "mean-path": cmd_mean_path,
    "laplace-check": cmd_laplace_check,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.backend_info:
        print(BACKEND)
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_OK

    overrides = {k: getattr(args, k, None)
                 for k in ("seed", "n_paths", "dt", "horizon", "measure",
                           "antithetic", "n_threads", "exit_intensity")}
    try:
        rc = load_config(args.config, overrides)
    except SchemaError as e:
        print(str(e), file=sys.stderr)
        return EXIT_SCHEMA
    except (OSError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_SCHEMA

    if args.command == "spectrum":
        if args.lambda_min is None:
            args.lambda_min = rc.market.r - 0.1
        if args.lambda_max is None:
            args.lambda_max = rc.market.r + 0.1

    return _COMMANDS[args.command](rc, args)


if __name__ == "__main__":
    sys.exit(main())
