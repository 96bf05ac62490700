"""Command-line interface.

Subcommands: report, sweep, oracle, modes, mc, fit, correct.  Every run
that writes an output file also writes a manifest JSON next to it
(<output>.manifest.json) recording the subcommand, config path, seed and
tool version, so runs are reproducible from their artifacts alone.

Exit codes: 0 success, 1 validation or input error, 2 model-validity error
(a probability left [0, 1], the low-gain closed forms do not apply).

Set HSPS_LOG=debug for verbose progress on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, ModelValidityError, load_config
from . import modes as modes_mod
from . import montecarlo as mc
from . import oracle as oracle_mod
from . import pipeline as pipeline_mod
from .stats import full_report, report_to_dict

log = logging.getLogger("hsps")


def _setup_logging():
    level = os.environ.get("HSPS_LOG", "warning").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _write_manifest(out_path: str, args, subcommand: str):
    manifest = {
        "subcommand": subcommand,
        "config_path": getattr(args, "config", None),
        "seed": getattr(args, "seed", None),
        "output_dir": os.path.dirname(os.path.abspath(out_path)),
        "tool_version": __version__,
        "parameters": {
            k: v
            for k, v in vars(args).items()
            if k not in {"func", "config", "seed"} and v is not None
        },
    }
    path = out_path + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.debug("manifest written to %s", path)


def _emit_json(doc: dict, args, subcommand: str):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_manifest(args.out, args, subcommand)
    else:
        json.dump(doc, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


def _parse_grid(spec: str):
    try:
        lo, hi, step = (float(tok) for tok in spec.split(":"))
    except ValueError:
        raise ConfigError(f"--grid expects min:max:step, got {spec!r}") from None
    return lo, hi, step


def _parse_raman(spec: str):
    try:
        s1, s2 = (float(tok) for tok in spec.split(","))
    except ValueError:
        raise ConfigError(f"--raman expects s1,s2 got {spec!r}") from None
    return s1, s2


def cmd_report(args) -> int:
    config = load_config(args.config)
    counts, figures = full_report(config)
    _emit_json(report_to_dict(counts, figures), args, "report")
    return 0


def cmd_sweep(args) -> int:
    lo, hi, step = _parse_grid(args.grid)
    grid = pipeline_mod.sweep_contour(args.p_pair, (lo, hi), (lo, hi), step)
    pipeline_mod.write_contour_csv(grid, args.out, {"seed": args.seed})
    _write_manifest(args.out, args, "sweep")
    log.info("contour grid %dx%d written to %s", grid.sigma_s_values.size,
             grid.sigma_i_values.size, args.out)
    return 0


def cmd_oracle(args) -> int:
    config = load_config(args.config)
    rows = oracle_mod.comparison_rows(config, include_gaussian=not args.no_gaussian)
    oracle_mod.write_comparison_csv(rows, args.out)
    _write_manifest(args.out, args, "oracle")
    worst = max(rows, key=lambda r: r["rel_err"])
    log.info("worst relative error %.3e on %s", worst["rel_err"], worst["quantity"])
    return 0


def cmd_modes(args) -> int:
    config = load_config(args.config)
    report = modes_mod.mode_report(config)
    doc = report.as_dict()
    if args.sweep_out:
        ind = modes_mod.indistinguishability_report(args.p_pair)
        modes_mod.write_strategy_csv(ind, args.sweep_out)
        doc["strategy_sweep"] = {
            "path": args.sweep_out,
            "better_g2_strategy": ind.better_g2_strategy,
            "better_h_strategy": ind.better_h_strategy,
        }
        _write_manifest(args.sweep_out, args, "modes")
    _emit_json(doc, args, "modes")
    return 0


def cmd_mc(args) -> int:
    config = load_config(args.config)
    raman = None
    if args.raman:
        s1, s2 = _parse_raman(args.raman)
        raman = (s1, s2, args.p_ave)
    model = mc.build_pulse_model(config, source=args.source, raman=raman)
    progress = None
    if log.isEnabledFor(logging.INFO):
        progress = lambda done, total: log.info("simulated %d / %d pulses", done, total)
    tallies = mc.simulate(model, args.pulses, seed=args.seed,
                          workers=args.workers, progress=progress)
    estimates = mc.estimate(tallies, config)
    doc = {
        "seed": args.seed,
        "pulses": args.pulses,
        "tallies": tallies.as_dict(),
        "estimates": estimates.as_dict(),
        "predictions": {
            k: v for k, v in mc.model_predictions(model, config).items() if k != "joint"
        },
    }
    _emit_json(doc, args, "mc")
    return 0


def cmd_fit(args) -> int:
    records = pipeline_mod.read_power_records(args.data)
    fit = pipeline_mod.fit_quadratic(records, band=args.band)
    doc = {
        "band": args.band,
        "s1": fit.s1,
        "s2": fit.s2,
        "residual_rms": fit.residual_rms,
        "covariance": [list(row) for row in fit.covariance],
        "n_records": len(records),
    }
    _emit_json(doc, args, "fit")
    return 0


def cmd_correct(args) -> int:
    config = load_config(args.config)
    records = pipeline_mod.read_power_records(args.data)
    fit = pipeline_mod.fit_quadratic(records, band=args.band)
    corrected = pipeline_mod.raman_correct(records, fit, config)
    pipeline_mod.write_corrected_csv(
        corrected, args.out, {"fit_s1": fit.s1, "fit_s2": fit.s2, "data": args.data}
    )
    _write_manifest(args.out, args, "correct")
    powers = [c.p_ave for c in corrected]
    if len(powers) >= 3:
        slope, se = pipeline_mod.power_slope(
            powers, [c.h.value for c in corrected], [c.h.std_error for c in corrected]
        )
        log.info("corrected H slope %.4g +- %.4g per mW", slope, se)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsps",
        description="Heralded single-photon source statistics, oracles and simulation",
    )
    parser.add_argument("--version", action="version", version=f"hsps {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, func, help_text, needs_config=True, needs_out_file=False):
        p = sub.add_parser(name, help=help_text)
        if needs_config:
            p.add_argument("--config", required=True, help="source config JSON")
        if needs_out_file:
            p.add_argument("--out", required=True, help="output file path")
        else:
            p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=0, help="random seed recorded in outputs")
        p.set_defaults(func=func)
        return p

    add("report", cmd_report, "closed-form count probabilities and figures of merit")

    p_sweep = add("sweep", cmd_sweep, "contour CSV of CAR, heralded g2 and H",
                  needs_config=False, needs_out_file=True)
    p_sweep.add_argument("--p-pair", type=float, required=True, dest="p_pair",
                         help="pair rate per pulse")
    p_sweep.add_argument("--grid", default="0.1:3.0:0.05",
                         help="normalized bandwidth axis as min:max:step (both axes)")

    p_oracle = add("oracle", cmd_oracle, "closed form vs quadrature vs Gaussian-state CSV",
                   needs_out_file=True)
    p_oracle.add_argument("--no-gaussian", action="store_true",
                          help="skip the Gaussian-state comparison rows")

    p_modes = add("modes", cmd_modes, "Schmidt spectrum and single-mode report")
    p_modes.add_argument("--p-pair", type=float, default=0.005, dest="p_pair",
                         help="pair rate for the strategy sweep")
    p_modes.add_argument("--sweep-out", default=None,
                         help="also emit the narrowband-strategy sweep CSV here")

    p_mc = add("mc", cmd_mc, "Monte Carlo counting run with estimates")
    p_mc.add_argument("--pulses", type=int, required=True, help="number of pump pulses")
    p_mc.add_argument("--workers", type=int, default=1,
                      help="chunk-generation workers (results are worker-independent)")
    p_mc.add_argument("--source", choices=("analytic", "gaussian_oracle"), default="analytic")
    p_mc.add_argument("--raman", default=None, help="Raman/pair coefficients as s1,s2")
    p_mc.add_argument("--p-ave", type=float, default=1.0, dest="p_ave",
                      help="average pump power in mW for the --raman model")

    p_fit = add("fit", cmd_fit, "quadratic power fit of a record CSV", needs_config=False)
    p_fit.add_argument("--data", required=True, help="power-record CSV")
    p_fit.add_argument("--band", choices=("idler", "signal"), default="idler")

    p_corr = add("correct", cmd_correct, "Raman-corrected estimates from a record CSV",
                 needs_out_file=True)
    p_corr.add_argument("--data", required=True, help="power-record CSV")
    p_corr.add_argument("--band", choices=("idler", "signal"), default="idler")

    return parser


def run(argv) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ModelValidityError as exc:
        print(f"hsps: model validity: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, pipeline_mod.PipelineError, mc.ModelInconsistencyError,
            mc.EstimationError, pipeline_mod.CorrectionRegimeError,
            oracle_mod.OracleConvergenceError, oracle_mod.OracleConditioningError,
            ValueError, OSError) as exc:
        print(f"hsps: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
