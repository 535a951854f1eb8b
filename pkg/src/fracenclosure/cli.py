"""Command-line entry point: ``fracenclosure <subcommand> --config FILE``.

Subcommands write CSV files into the output directory:

``sweep``           samples.csv
``reconstruct``     samples.csv, fit.csv
``threshold``       samples.csv, fit.csv, thresholds.csv
``verify-oracles``  oracles.csv
``roundtrip``       roundtrip.csv, measurement.csv

Every run also writes ``columns.csv`` describing the columns it emitted.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import CANONICAL, ExperimentConfig, load_config
from .enclosure import SweepFit, analytic_branch, extract_distance, run_sweep, threshold_test
from .exceptions import ConfigurationError, FitError, NumericalError
from .indicator import indicator_boundary
from .oracles import run_oracle_suite
from .scaled import ScaledValue
from .timedomain import export_measurement_csv, indicator_from_data, simulate_measurement

log = logging.getLogger("fracenclosure")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COLUMNS = {
    "samples.csv": [
        ("tau", "Laplace parameter"),
        ("ttilde", "tau**(alpha0/2)"),
        ("I_mantissa", "indicator I = mantissa * exp(log_scale)"),
        ("I_log_scale", "integer log scale of I"),
        ("scaled_log", "tau**(-alpha0/2) * log|I|"),
        ("lower_mantissa", "lower volume bound, mantissa"),
        ("lower_log_scale", "lower volume bound, log scale"),
        ("upper_mantissa", "upper volume bound, mantissa"),
        ("upper_log_scale", "upper volume bound, log scale"),
        ("volume_mantissa", "volume form of I, mantissa"),
        ("volume_log_scale", "volume form of I, log scale"),
        ("floor_mantissa", "noise floor, mantissa"),
        ("floor_log_scale", "noise floor, log scale"),
        ("residual", "relative solver residual"),
        ("iterations", "solver iterations"),
        ("usable", "1 if |I| exceeds the noise floor"),
        ("error", "failure message, empty on success"),
    ],
    "fit.csv": [("key", "fit quantity"), ("value", "its value")],
    "thresholds.csv": [
        ("T", "time-like threshold parameter"),
        ("classification", "branch from the fitted distance and sign"),
        ("analytic", "branch from the exact geometry"),
        ("trend_slope", "slope of the prefactor-corrected exponent over the top half of the sweep"),
        ("corroborated", "1 if the trend agrees with the classification"),
        ("two_d_fit", "twice the fitted distance"),
    ],
    "oracles.csv": [("check", "oracle"), ("detail", "case"), ("value", "relative error, ratio or order")],
    "roundtrip.csv": [
        ("tau", "Laplace parameter"),
        ("data_mantissa", "indicator from time-domain data, mantissa"),
        ("data_log_scale", "indicator from time-domain data, log scale"),
        ("analysis_mantissa", "indicator from the scattered field, mantissa"),
        ("analysis_log_scale", "indicator from the scattered field, log scale"),
        ("rel_diff", "relative difference data vs analysis"),
    ],
    "measurement.csv": [
        ("face_id", "boundary face index, sides x-, x+, y-, y+, z-, z+"),
        ("t", "time"),
        ("value", "outward normal derivative of the solution"),
    ],
}


def _num(x) -> str:
    return repr(float(x))


def _sv(v: ScaledValue) -> list[str]:
    return [_num(v.mantissa), _num(v.log_scale)]


def _write(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_columns(out: Path, files: list[str]) -> None:
    _write(out / "columns.csv", ["file", "column", "description"],
           [[f, c, d] for f in files for c, d in COLUMNS[f]])


def _sweep(cfg: ExperimentConfig, out: Path, workers: int):
    if not cfg.tau_schedule:
        raise ConfigurationError("config has no [sweep] schedule")
    sweep = run_sweep(cfg.problem, cfg.probe, cfg.tau_schedule, workers=workers, subfaces=cfg.subfaces)
    rows = []
    for s in sweep.samples:
        rows.append([
            _num(s.tau), _num(s.tau ** (cfg.problem.alpha0 / 2)), *_sv(s.I), _num(s.scaled_log),
            *_sv(s.lower_bound), *_sv(s.upper_bound), *_sv(s.volume_form), *_sv(s.noise_floor),
            _num(s.solver_residual), str(s.iterations), str(int(s.usable)), s.error or "",
        ])
    _write(out / "samples.csv", [c for c, _ in COLUMNS["samples.csv"]], rows)
    return sweep


def _fit(cfg: ExperimentConfig, sweep, out: Path) -> SweepFit | None:
    rows = [["fingerprint", sweep.fingerprint], ["distance_exact", _num(cfg.distance_exact)]]
    try:
        fit = extract_distance(sweep)
    except FitError as exc:
        rows += [["status", "fit_refused"], ["jump_sign", getattr(exc, "jump_sign", "none")],
                 ["message", str(exc)]]
        _write(out / "fit.csv", ["key", "value"], rows)
        if getattr(exc, "jump_sign", "none") == "none":
            log.info("no usable samples: jump_sign=none, distance fit refused")
            return None
        raise
    rows += [
        ["status", "ok"],
        ["distance_estimate", _num(fit.distance_estimate)],
        ["jump_sign", fit.jump_sign],
        ["prefactor_exponent", _num(fit.prefactor_exponent)],
        ["intercept", _num(fit.intercept)],
        ["residual", _num(fit.fit_residual)],
        ["tau0_empirical", _num(fit.tau0_empirical)],
        ["n_used", str(fit.n_used)],
        ["warnings", " | ".join(fit.warnings)],
    ]
    _write(out / "fit.csv", ["key", "value"], rows)
    log.info("distance %.6g (exact %.6g), jump %s", fit.distance_estimate, cfg.distance_exact, fit.jump_sign)
    return fit


def cmd_sweep(cfg, out, workers) -> int:
    _sweep(cfg, out, workers)
    _write_columns(out, ["samples.csv"])
    return EXIT_OK


def cmd_reconstruct(cfg, out, workers) -> int:
    sweep = _sweep(cfg, out, workers)
    _fit(cfg, sweep, out)
    _write_columns(out, ["samples.csv", "fit.csv"])
    return EXIT_OK


def cmd_threshold(cfg, out, workers) -> int:
    if not cfg.T_values:
        raise ConfigurationError("config has no [threshold] T values")
    sweep = _sweep(cfg, out, workers)
    fit = _fit(cfg, sweep, out)
    sign = cfg.problem.profile.sign
    exact_sign = "positive" if sign > 0 else "negative" if sign < 0 else "none"
    rows = []
    for T in cfg.T_values:
        analytic = analytic_branch(T, cfg.distance_exact, exact_sign)
        if fit is None:
            rows.append([_num(T), "tends_to_zero", analytic, "nan", "1", "nan"])
            continue
        r = threshold_test(sweep, T, fit)
        rows.append([_num(T), r.classification, analytic, _num(r.trend_slope), str(int(r.corroborated)),
                     _num(r.two_d)])
        log.info("T=%g: %s (analytic %s)", T, r.classification, analytic)
    _write(out / "thresholds.csv", [c for c, _ in COLUMNS["thresholds.csv"]], rows)
    _write_columns(out, ["samples.csv", "fit.csv", "thresholds.csv"])
    return EXIT_OK


def cmd_verify_oracles(cfg, out, workers) -> int:
    rep = run_oracle_suite(cfg.probe, cfg.problem.box, cfg.problem.alpha0)
    rows = [[a, b, _num(c)] for a, b, c in rep.rows()]
    _write(out / "oracles.csv", ["check", "detail", "value"], rows)
    _write_columns(out, ["oracles.csv"])
    print(f"closed form vs quadrature: max rel error {rep.closed_form_max_rel:.3e}")
    print(f"asymptotic coefficient ratio: max |ratio - 1| {rep.asymptotic_max_dev:.3e}")
    print(f"PDE residual: least observed order {rep.pde_min_order:.4f}")
    return EXIT_OK


def cmd_roundtrip(cfg, out, workers) -> int:
    td = cfg.timedomain
    problem = cfg.problem if td.grid is None else cfg.problem.with_resolution(td.grid)
    times = np.linspace(0.0, td.t_max, td.n_steps + 1)
    meas = simulate_measurement(problem, cfg.probe, times, s_truncation=td.s_truncation, n_quad=td.n_quad,
                                workers=workers)
    export_measurement_csv(meas, out / "measurement.csv", t_stride=td.t_stride)
    rows, worst = [], 0.0
    for tau in td.taus:
        data = indicator_from_data(meas, tau, cfg.probe, problem.alpha0)
        ana = indicator_boundary(tau, problem, cfg.probe).I
        if ana.is_zero():
            rel = 0.0 if data.is_zero() else math.inf
        else:
            rel = abs(float(data / ana) - 1.0)
        worst = max(worst, rel)
        rows.append([_num(tau), *_sv(data), *_sv(ana), _num(rel)])
        log.info("tau=%g: data %s analysis %s rel diff %.3e", tau, data, ana, rel)
    _write(out / "roundtrip.csv", [c for c, _ in COLUMNS["roundtrip.csv"]], rows)
    _write_columns(out, ["roundtrip.csv", "measurement.csv"])
    if worst > td.tolerance:
        raise NumericalError(f"indicator paths disagree by {worst:.3e} > {td.tolerance:g}", achieved=worst)
    return EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "reconstruct": cmd_reconstruct,
    "threshold": cmd_threshold,
    "verify-oracles": cmd_verify_oracles,
    "roundtrip": cmd_roundtrip,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracenclosure", description="Enclosure-method experiments.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("-c", "--config", required=True,
                    help=f"config file, or one of: {', '.join(CANONICAL)}")
    ap.add_argument("-o", "--output", default="out", help="output directory (default: out)")
    ap.add_argument("-w", "--workers", type=int, default=None, help="process pool size (default: from config)")
    ap.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        workers = cfg.workers if args.workers is None else max(1, args.workers)
        return COMMANDS[args.command](cfg, out, workers)
    except ConfigurationError as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        extra = f" (achieved {exc.achieved:.3e})" if exc.achieved is not None else ""
        print(f"error: numerical: {exc}{extra}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
