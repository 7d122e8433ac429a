#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Console entry point `edgespectra`. Every subcommand reads a JSON run
configuration, writes its tables and a manifest to the output directory
and exits with

    0 success, 1 I/O error, 2 configuration error,
    3 solver failure or failure budget exceeded.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from edgespectra import __version__
from edgespectra import io
from edgespectra.assembly import assemble_full
from edgespectra.config import PINNED_FLUX, ConfigError, RunManifest, parse_config
from edgespectra.experiments import fit_decay, hypothesis1_flux_scan, resolve_flux, sweep
from edgespectra.model import (LatticeVariant, WallSide, build_lattice, sample_realization)
from edgespectra.observables import diagnose_all
from edgespectra.spectral import (ConvergenceError, dispersion_branches, eigs_in_window,
                                  feynman_hellmann_residual, fiber_window_spectrum)

__author__ = "edgespectra developers"
__license__ = "mit"

_logger = logging.getLogger(__name__)

COMMANDS = ("dispersion", "spectrum", "classify", "theorem1", "theorem2", "flux-scan", "fit",
            "selftest")
DECAY_MODEL = {"theorem1": "log_sq", "theorem2": "sqrt"}


class FailureBudgetError(RuntimeError):
    pass


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated numbers, got "
                                         "{!r}".format(text))


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated integers, got "
                                         "{!r}".format(text))


def parse_args(args):
    """Parse command line parameters

    Args:
      args ([str]): command line parameters as list of strings

    Returns:
      :obj:`argparse.Namespace`: command line parameters namespace
    """
    parser = argparse.ArgumentParser(
        description="Edge and bulk spectra of magnetic random Schroedinger operators "
                    "on a cylinder")
    parser.add_argument(
        '--version',
        action='version',
        version='EdgeSpectra {ver}'.format(ver=__version__))
    parser.add_argument(dest="command", choices=COMMANDS, help="subcommand")
    parser.add_argument(dest="reports", nargs="*", metavar="REPORT",
                        help="report directories consumed by 'fit'")
    parser.add_argument('--config', dest="config", metavar="PATH",
                        help="JSON run configuration")
    parser.add_argument('--out', dest="out", required=True, metavar="DIR",
                        help="output directory (the directory checked by 'selftest')")
    parser.add_argument('--seeds', dest="seeds", type=int, metavar="N",
                        help="use seeds 0..N-1")
    parser.add_argument('--seed-list', dest="seed_list", type=_int_list, metavar="S1,S2,..",
                        help="explicit seeds")
    parser.add_argument('--workers', dest="workers", type=int, metavar="N",
                        help="size of the process pool")
    parser.add_argument('--window', dest="window", type=_float_list, metavar="LO,HI",
                        help="energy window override")
    parser.add_argument('--flux', dest="flux", type=float, metavar="VALUE",
                        help="flux in flux quanta (overrides 'auto')")
    parser.add_argument('--L-list', dest="L_list", type=_float_list, metavar="L1,L2,..",
                        help="circumferences of a multi-L sweep")
    parser.add_argument('--vectors', dest="vectors", action="store_true",
                        help="also store eigenvectors (spectrum, classify)")
    parser.add_argument('--export-operator', dest="export_operator", action="store_true",
                        help="also write the Hamiltonian in COO text format (spectrum)")
    parser.add_argument(
        '-v',
        '--verbose',
        dest="loglevel",
        help="set loglevel to INFO",
        action='store_const',
        const=logging.INFO)
    parser.add_argument(
        '-vv',
        '--very-verbose',
        dest="loglevel",
        help="set loglevel to DEBUG",
        action='store_const',
        const=logging.DEBUG)
    return parser.parse_args(args)


def setup_logging(loglevel):
    """Setup basic logging

    Args:
      loglevel (int): minimum loglevel for emitting messages
    """
    logformat = "[%(asctime)s] %(levelname)s:%(name)s:%(message)s"
    logging.basicConfig(level=loglevel or logging.WARNING, stream=sys.stdout,
                        format=logformat, datefmt="%Y-%m-%d %H:%M:%S")


def load_run(args):
    """
    Parses the configuration and applies the command line overrides.
    """
    if args.config is None:
        raise ConfigError("Subcommand '{}' needs --config!".format(args.command), "config")
    config = parse_config(args.config)
    if config.experiment != args.command:
        raise ConfigError("Configuration is for '{}', not '{}'!".format(config.experiment,
                                                                       args.command),
                          "experiment")
    overrides = {}
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    if args.seed_list is not None:
        overrides["seeds"] = args.seed_list
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.window is not None:
        overrides["window"] = args.window
    if args.flux is not None:
        overrides["flux"] = args.flux
    if args.L_list is not None:
        overrides["L_list"] = args.L_list
    if overrides:
        config = config.replace(**overrides)
        config.check_invariants()
    return config


def resolve_flux_for(config, params):
    """
    Flux of an "auto" run: the best flux of a scan over the experiment
    window, or PINNED_FLUX when there is no window or no edge state in it.
    """
    window = config.scan_window(params)
    if window is None:
        _logger.warning("no energy window to scan; flux pinned at %s", PINNED_FLUX)
        return PINNED_FLUX
    try:
        return resolve_flux(params, config.basis(params), config.flux_grid, window)
    except ValueError as err:
        _logger.warning("%s Flux pinned at %s", err, PINNED_FLUX)
        return PINNED_FLUX


def resolve_params(config, L=None):
    """ ModelParams and Basis of one run, with an "auto" flux resolved. """
    params = config.model_params()
    if L is not None:
        params = params.replace(L=float(L))
    if config.auto_flux:
        params = params.replace(flux=resolve_flux_for(config, params))
    return params, config.basis(params)


def _sizes(config):
    return config.L_list if config.L_list else (None,)


def _subdir(out, L, config):
    if not config.L_list:
        return out
    path = os.path.join(out, "L_{:g}".format(L))
    os.makedirs(path, exist_ok=True)
    return path


def cmd_dispersion(config, args):
    params, basis = resolve_params(config)
    for side in (WallSide.LEFT, WallSide.RIGHT):
        branches = dispersion_branches(side, params, basis, config.n_max, config.k_range)
        rows = [{"n": b.n, "k": k, "energy": e, "current": j, "side": side.value}
                for b in branches for k, e, j in zip(b.k, b.energies, b.currents)]
        io.write_table(os.path.join(args.out, "dispersion_{}.csv".format(side.value)),
                       "dispersion", rows)
        if _logger.isEnabledFor(logging.INFO):
            for b in branches:
                _logger.info("%s branch n=%d: Feynman-Hellmann residual %.2e", side.value,
                             b.n, feynman_hellmann_residual(b, params))
    manifest = RunManifest.create(config, params, basis)
    io.write_json(os.path.join(args.out, "manifest.json"), manifest.to_dict())
    return 0


def _window_spectrum(config, args, with_diagnostics):
    params, basis = resolve_params(config)
    window = config.energy_window(params)
    lattice = build_lattice(LatticeVariant.GAP, params.L)
    seed = config.seeds[0]
    omega = sample_realization(seed, lattice, params.V0)
    op = assemble_full(omega, basis, params,
                       quad_order=config.discretization["quad_order"])
    records = eigs_in_window(op, window, config.tol)
    io.write_table(os.path.join(args.out, "spectrum.csv"), "spectrum",
                   io.spectrum_rows(records, window))
    if omega.is_trivial():
        fibers = fiber_window_spectrum(basis, params, op.walls, window)
        io.write_table(os.path.join(args.out, "fibers.csv"), "fibers",
                       [{"j": s.j, "k": s.k, "energy": s.energy, "current": s.current}
                        for s in fibers])
    if with_diagnostics:
        diags = diagnose_all(records, op, config.classification_thresholds())
        io.write_table(os.path.join(args.out, "diagnostics.csv"), "diagnostics",
                       io.diagnostics_rows(diags))
    if args.vectors:
        io.write_vectors(os.path.join(args.out, "vectors.npz"), records, basis)
    if args.export_operator:
        op.export_coo(os.path.join(args.out, "operator.coo.txt"))
    manifest = RunManifest.create(config, params, basis, window)
    manifest.derived["seed"] = seed
    io.write_json(os.path.join(args.out, "manifest.json"), manifest.to_dict())
    return 0


def cmd_spectrum(config, args):
    return _window_spectrum(config, args, False)


def cmd_classify(config, args):
    return _window_spectrum(config, args, True)


def cmd_theorem(config, args):
    params = config.model_params(flux=PINNED_FLUX if config.auto_flux else None)
    window = config.energy_window(params)

    def write(report, basis):
        out = _subdir(args.out, report.params.L, config)
        io.write_report(out, report, RunManifest.create(config, report.params, basis, window))

    disc = config.discretization
    result = sweep(config.experiment, params, L_list=config.L_list or (config.L,),
                   seeds=config.seeds,
                   basis_options={"n_x": disc["n_x"], "J": disc["J"],
                                  "points_per_length": disc["points_per_length"]},
                   flux_grid=config.flux_grid if config.auto_flux else None,
                   window=window, on_report=write,
                   thresholds=config.classification_thresholds(), tol=config.tol,
                   workers=config.workers, quad_order=disc["quad_order"],
                   progress=_logger.getEffectiveLevel() <= logging.INFO)
    if result.fit is not None:
        medians = result.medians()
        _write_fit(args.out, result.fit, list(medians), list(medians.values()))
    over_budget = [(L, r.failure_fraction) for L, r in sorted(result.reports.items())
                   if r.failure_fraction > config.max_failure_fraction]
    if over_budget:
        raise FailureBudgetError("failure fraction above {} at {}".format(
            config.max_failure_fraction,
            ", ".join("L={:g} ({:.2f})".format(L, f) for L, f in over_budget)))
    return 0


def cmd_flux_scan(config, args):
    rows = []
    for L in _sizes(config):
        params = config.model_params(flux=0.)
        if L is not None:
            params = params.replace(L=float(L))
        basis = config.basis(params)
        window = config.energy_window(params)
        table = hypothesis1_flux_scan(params, basis, config.flux_grid, window)
        rows.extend({"L": params.L, "flux": r.flux, "n_left": r.n_left, "n_right": r.n_right,
                     "min_spacing": r.min_spacing, "scaled_spacing": r.scaled_spacing}
                    for r in table.rows)
        _logger.info("L=%g: best flux %.4g", params.L, table.best_flux)
    io.write_table(os.path.join(args.out, "flux_scan.csv"), "flux_scan", rows)
    manifest = RunManifest.create(config, config.model_params(flux=0.))
    io.write_json(os.path.join(args.out, "manifest.json"), manifest.to_dict())
    return 0


def _median_of_records(records):
    values = np.array([r["median_shift"] for r in records if r["status"] == "ok"])
    values = values[np.isfinite(values)]
    return float(np.median(values)) if values.size else float("nan")


def _write_fit(out, fit, L_values, medians):
    order = np.argsort(L_values)
    L_values = [float(L_values[i]) for i in order]
    medians = [float(medians[i]) for i in order]
    io.write_table(os.path.join(out, "fit_points.csv"), "fit_points",
                   [{"L": L, "median_shift": m, "censored": L in fit.censored}
                    for L, m in zip(L_values, medians)])
    io.write_table(os.path.join(out, "fit_summary.csv"), "fit", [fit.to_dict()])


def cmd_fit(args, config=None):
    reports = list(args.reports) or list(config.reports if config else ())
    if len(reports) < 1:
        raise ConfigError("The fit subcommand needs report directories!", "reports")
    experiments, L_values, medians = set(), [], []
    for path in reports:
        manifest, records = io.read_report(path)
        experiments.add(manifest["derived"]["experiment"])
        L_values.append(float(manifest["derived"]["L"]))
        medians.append(_median_of_records(records))
    if len(experiments) != 1 or not experiments <= set(DECAY_MODEL):
        raise ConfigError("Reports mix or lack decay experiments: {}!".format(
            sorted(experiments)), "reports")
    experiment = experiments.pop()
    tol = config.tol if config else 1e-10
    fit = fit_decay(L_values, medians, DECAY_MODEL[experiment], tol)
    _write_fit(args.out, fit, L_values, medians)
    io.write_json(os.path.join(args.out, "fit.json"),
                  dict(fit.to_dict(), experiment=experiment, reports=reports))
    return 0


def cmd_selftest(args):
    problems = io.validate_directory(args.out)
    failed = {name: p for name, p in problems.items() if p}
    for name, p in sorted(failed.items()):
        for line in p:
            print(line)
    print("{} file(s) checked, {} invalid".format(len(problems), len(failed)))
    return 1 if failed else 0


def run_command(args):
    if args.command == "selftest":
        return cmd_selftest(args)
    os.makedirs(args.out, exist_ok=True)
    if args.command == "fit":
        config = load_run(args) if args.config else None
        return cmd_fit(args, config)
    config = load_run(args)
    handlers = {"dispersion": cmd_dispersion, "spectrum": cmd_spectrum,
                "classify": cmd_classify, "theorem1": cmd_theorem, "theorem2": cmd_theorem,
                "flux-scan": cmd_flux_scan}
    return handlers[args.command](config, args)


def _fail(args, exit_code, err, field=None):
    record = io.error_record(exit_code, type(err).__name__, str(err), field)
    text = json.dumps(record, sort_keys=True)
    print(text, file=sys.stderr)
    if args.out and os.path.isdir(args.out):
        try:
            io.write_json(os.path.join(args.out, "error.json"), record)
        except OSError:
            pass
    return exit_code


def main(args):
    """Main entry point allowing external calls

    Args:
      args ([str]): command line parameter list

    Returns:
      int: exit status
    """
    args = parse_args(args)
    setup_logging(args.loglevel)
    _logger.debug("Starting %s", args.command)
    try:
        status = run_command(args)
    except ConfigError as err:
        return _fail(args, 2, err, err.field)
    except ValueError as err:
        return _fail(args, 2, err)
    except (ConvergenceError, FailureBudgetError) as err:
        return _fail(args, 3, err)
    except OSError as err:
        return _fail(args, 1, err)
    _logger.info("%s finished with status %d", args.command, status)
    return status


def run():
    """Entry point for console_scripts
    """
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    run()
