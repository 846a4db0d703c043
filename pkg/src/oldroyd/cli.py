"""Command-line surface.

Subcommands: decay-character, linear, simulate, fit, verify-bounds, plot.
Exit codes: 0 success, 1 validation error, 2 runtime abort (CFL or NaN),
3 acceptance-check failure.  Errors go to standard error with the prefix
``ERROR <code>:``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as oio
from . import rates as orates
from .config import ConfigError, RunConfig, parse_config
from .decay import NoDecayCharacterError, estimate_r_star
from .propagator import linear_energy_curve, verify_pointwise_bounds
from .solver import SimState, SolverAbort, fields_from_profiles, random_band_fields, run

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILED = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fail(code: int, message: str) -> int:
    print(f"ERROR {code}: {message}", file=sys.stderr)
    return code


def _load_config(path: str) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oldb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decay-character", help="estimate r* of the configured profiles")
    p.add_argument("--config", required=True)

    p = sub.add_parser("linear", help="continuum linear decay curves and slope fits")
    p.add_argument("--config", required=True)

    p = sub.add_parser("simulate", help="advance the box solver and record diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", help="checkpoint file to continue from")

    p = sub.add_parser("fit", help="fit slopes of a series against predictions")
    p.add_argument("--series", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="report path (default: report.json in the output dir)")

    p = sub.add_parser("verify-bounds", help="scan the pointwise kernel bounds")
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--grid-points", type=int, default=200)
    p.add_argument("--t-max", type=float, default=100.0)
    p.add_argument("--out", help="optional JSON report path")

    p = sub.add_parser("plot", help="log-log SVG plot of series columns")
    p.add_argument("--series", required=True)
    p.add_argument("--columns", required=True, help="comma-separated column names")
    p.add_argument("--out", required=True)
    p.add_argument("--guide", type=float, action="append", default=[],
                   help="reference slope guide line (repeatable)")

    return parser


def _cmd_decay_character(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(config)
    records = []
    for side, spec in (("u", config.initial_u), ("tau", config.initial_tau)):
        if spec.family == "none":
            continue
        if spec.family == "random_band":
            return _fail(EXIT_VALIDATION,
                         f"initial.{side}: random_band has no continuum profile to estimate")
        profile = spec.to_profile()
        try:
            est = estimate_r_star(profile)
        except NoDecayCharacterError as err:
            print(f"{side}: no decay character ({err})")
            records.append({"field": side, "family": spec.family,
                            "r_star": None, "p_r_value": None, "error": str(err)})
            continue
        print(f"{side}: r* = {est.r_star:.4f}  P = {est.p_r_value:.6g}  "
              f"stderr = {est.slope_stderr:.2g}")
        records.append({
            "field": side, "family": spec.family, "r_star": est.r_star,
            "p_r_value": est.p_r_value, "slope_stderr": est.slope_stderr,
            "fit_window": list(est.fit_window),
        })
    if not records:
        return _fail(EXIT_VALIDATION, "no initial profiles configured")
    oio.emit_report({"records": records}, oio.report_path(out, "decay_character"))
    return EXIT_OK


def _predicted_linear_exponent(r_u, r_tau) -> float:
    branches = [b for b in (r_u, None if r_tau is None else 1.0 + r_tau) if b is not None]
    return -(1.5 + min(branches))


def _cmd_linear(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(config)
    u_prof = config.initial_u.to_profile() if config.initial_u.family != "none" else None
    tau_prof = config.initial_tau.to_profile() if config.initial_tau.family != "none" else None
    if config.initial_u.family == "random_band" or config.initial_tau.family == "random_band":
        return _fail(EXIT_VALIDATION, "random_band has no continuum profile; use simulate")
    if u_prof is None and tau_prof is None:
        return _fail(EXIT_VALIDATION, "no initial profiles configured")
    window = (config.rates.t_lo, config.rates.t_hi)
    tol = config.rates.tolerance if config.rates.tolerance is not None else 0.1
    times = np.geomspace(max(window[0], 1e-3), window[1], 33)
    series = linear_energy_curve(u_prof, tau_prof, config.physics.omega, times)
    oio.emit_timeseries(series, out / "linear_timeseries.csv")
    r_u, r_tau = config.decay_characters()
    predicted = _predicted_linear_exponent(r_u, r_tau)
    fit = orates.fit_loglog_slope(series, "energy", window)
    verdict = "pass" if abs(fit.slope - predicted) <= tol else "fail"
    records = [oio.fit_record("energy", predicted, fit, verdict)]
    oio.emit_report({"window": list(window), "tolerance": tol, "records": records},
                    oio.report_path(out, "linear_report"))
    print(f"energy: predicted {predicted:.4f}  fitted {fit.slope:.4f} "
          f"(stderr {fit.stderr:.2g})  {verdict}")
    return EXIT_OK


def _initial_state(config: RunConfig) -> SimState:
    grid = config.grid
    u_spec, tau_spec = config.initial_u, config.initial_tau
    if "random_band" in (u_spec.family, tau_spec.family):
        seed_spec = u_spec if u_spec.family == "random_band" else tau_spec
        u_band, tau_band = random_band_fields(
            grid,
            k_lo=seed_spec.k_lo,
            k_hi=seed_spec.k_hi,
            amplitude=seed_spec.amplitude,
            seed=seed_spec.seed,
        )
    u_prof = u_spec.to_profile() if u_spec.family not in ("none", "random_band") else None
    tau_prof = tau_spec.to_profile() if tau_spec.family not in ("none", "random_band") else None
    u_field, tau_field = fields_from_profiles(grid, u_prof, tau_prof)
    if u_spec.family == "random_band":
        u_field = u_band
    if tau_spec.family == "random_band":
        tau_field = tau_band
    return SimState(time=0.0, u=u_field, tau=tau_field, params=config.physics)


def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(config)
    if args.resume:
        state = oio.read_checkpoint(args.resume)
    else:
        state = _initial_state(config)
    series = run(state, config.solver, out_dir=out)
    oio.emit_timeseries(series, out / "timeseries.csv")
    print(f"advanced to t = {series.times[-1]:.6g}; series and checkpoints in {out}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(config)
    series = oio.read_timeseries(args.series)
    r_u, r_tau = config.decay_characters()
    if r_u is None and r_tau is None:
        return _fail(EXIT_VALIDATION,
                     "no decay characters available; set rates.r_u / rates.r_tau")
    prediction = orates.predicted_exponents(r_u, r_tau)
    window = (config.rates.t_lo, config.rates.t_hi)
    tol = config.rates.tolerance if config.rates.tolerance is not None else 0.25
    records = []
    failed = False
    for quantity, predicted in prediction.exponents.items():
        if quantity not in series.columns:
            continue
        vals = series.column(quantity)
        mask = (series.times >= window[0]) & (series.times <= window[1])
        if not np.all(vals[mask] > 0):
            continue
        fit = orates.fit_loglog_slope(series, quantity, window)
        verdict = "pass" if abs(fit.slope - predicted) <= tol else "fail"
        failed = failed or verdict == "fail"
        records.append(oio.fit_record(quantity, predicted, fit, verdict))
        print(f"{quantity}: predicted {predicted:.4f}  fitted {fit.slope:.4f}  {verdict}")
    if not records:
        return _fail(EXIT_VALIDATION, "no fittable columns inside the window")
    report = {"window": list(window), "tolerance": tol,
              "alpha": prediction.alpha, "records": records}
    target = Path(args.out) if args.out else oio.report_path(out, "fit_report")
    oio.emit_report(report, target)
    if failed:
        return _fail(EXIT_CHECK_FAILED, f"fitted slopes outside tolerance; see {target}")
    return EXIT_OK


def _cmd_verify_bounds(args) -> int:
    g = args.grid_points
    if g < 2:
        return _fail(EXIT_VALIDATION, "need at least 2 grid points")
    xi = np.linspace(args.radius / g, args.radius, g)
    ts = np.linspace(0.0, args.t_max, g)
    report = verify_pointwise_bounds(args.omega, args.radius, xi, ts)
    print(f"violations: {report.total_violations}")
    for name in ("a", "b", "c"):
        print(f"  kernel {name}: {report.violations[name]} violations, "
              f"worst relative margin {report.worst_rel_margin[name]:.6g}")
    if args.out:
        oio.emit_report(report.to_record(), args.out)
    return EXIT_OK if report.total_violations == 0 else EXIT_CHECK_FAILED


def _cmd_plot(args) -> int:
    series = oio.read_timeseries(args.series)
    columns = [c.strip() for c in args.columns.split(",") if c.strip()]
    if not columns:
        return _fail(EXIT_VALIDATION, "no columns requested")
    guides = [(f"slope {g:g}", g) for g in args.guide]
    oio.emit_plot(series, columns, args.out, guides=guides)
    print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {
    "decay-character": _cmd_decay_character,
    "linear": _cmd_linear,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "verify-bounds": _cmd_verify_bounds,
    "plot": _cmd_plot,
}


def cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        parser.print_usage(sys.stderr)
        return _fail(EXIT_VALIDATION, str(err))
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        for issue in err.issues:
            print(f"ERROR {EXIT_VALIDATION}: {issue}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverAbort as err:
        return _fail(EXIT_RUNTIME, str(err))
    except oio.CheckpointError as err:
        return _fail(EXIT_VALIDATION, str(err))
    except FileNotFoundError as err:
        return _fail(EXIT_VALIDATION, str(err))
    except (ValueError, KeyError) as err:
        return _fail(EXIT_VALIDATION, str(err))


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
