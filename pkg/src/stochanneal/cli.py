"""Command-line surface. Every subcommand prints its seed, writes tidy CSV
plus a JSON manifest, and is reproducible byte-for-byte from those flags.

Exit codes: 0 ok, 2 usage, 3 input error, 4 runtime error.
"""

from __future__ import annotations

import dataclasses
import functools
import os
import sys

import click
import numpy as np

from . import __version__
from .device import DriftModel, NeuronDevice, SCHEMES, SCHEME_IDEAL
from . import errors as _err
from .errors import StochAnnealError
from .experiments import (
    build_size_ladder,
    cycling_stats,
    d2d_experiment,
    max_solvable_size,
)
from .io_ingest import (
    BestKnownRegistry,
    ResultRow,
    brute_force_maxcut,
    generate_instance,
    read_instance,
    read_measurements,
    write_instance,
    write_manifest,
    write_results,
)
from .reference import get_reference
from .sampler import BoltzmannConfig, ensemble
from .surface import fit_surface, load_params, save_params

PARAMS_ENV = "STOCHANNEAL_PARAMS"


def _load_device_params(params_path):
    if params_path is None:
        params_path = os.environ.get(PARAMS_ENV)
    if params_path is None:
        return get_reference() + (None,)
    surface, drift = load_params(params_path)
    return surface, drift, params_path


# which module each error class belongs to, for CLI messages
_ERROR_MODULE = {
    _err.OutOfDomain: "surface",
    _err.NonPositiveTime: "surface",
    _err.NonPositivePulse: "device",
    _err.DegenerateDesign: "surface",
    _err.Unattainable: "device",
    _err.NonMonotone: "surface",
    _err.DimensionMismatch: "maxcut",
    _err.IndexOutOfRange: "maxcut",
    _err.Malformed: "io_ingest",
    _err.TooLarge: "io_ingest",
    _err.InvalidDegree: "io_ingest",
    _err.IoFailure: "io_ingest",
    _err.MissingBestKnown: "sampler",
    _err.InsufficientTraces: "experiments",
}


def _fail(code: int, module: str, exc: Exception):
    click.echo(f"error [{module}]: {exc}", err=True)
    sys.exit(code)


def _module_of(exc: Exception) -> str:
    for klass in type(exc).__mro__:
        if klass in _ERROR_MODULE:
            return _ERROR_MODULE[klass]
    return "stochanneal"


def handle_errors(module_on_input: str):
    """Map input-shaped failures to exit 3, everything else to exit 4."""

    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except click.ClickException:
                raise
            except (FileNotFoundError, PermissionError) as exc:
                _fail(3, module_on_input, exc)
            except StochAnnealError as exc:
                _fail(3, _module_of(exc), exc)
            except Exception as exc:  # noqa: BLE001 - CLI boundary
                _fail(4, module_on_input, exc)

        return wrapper

    return decorate


def _config_dict(cfg: BoltzmannConfig) -> dict:
    d = dataclasses.asdict(cfg)
    return d


@click.group()
@click.version_option(__version__)
def main():
    """Stochastic-RRAM Boltzmann machine toolkit."""


params_option = click.option(
    "--params",
    "params_path",
    type=click.Path(),
    default=None,
    show_default="packaged reference file",
    help=f"Device parameter JSON (falls back to ${PARAMS_ENV}).",
)
seed_option = click.option("--seed", type=int, default=0, show_default=True)
jobs_option = click.option("--jobs", type=int, default=1, show_default=True,
                           help="Parallel workers for ensembles.")


@main.command()
@click.option("--instance", "instance_path", type=click.Path(), required=True)
@params_option
@click.option("--scheme", type=click.Choice(SCHEMES), default=SCHEME_IDEAL, show_default=True)
@click.option("--iters", type=int, default=10000, show_default=True)
@click.option("--runs", type=int, default=1, show_default=True)
@seed_option
@click.option("--best-known", type=int, default=None, help="Override best-known cut.")
@click.option("--registry", "registry_path", type=click.Path(), default=None,
              help="Best-known registry JSON to consult.")
@click.option("--gain", type=float, default=0.2, show_default=True)
@click.option("--d2d-cv", type=float, default=0.0, show_default=True)
@click.option("--calibrate/--no-calibrate", default=False, show_default=True)
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="Also dump per-iteration energy series CSV.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@jobs_option
@handle_errors("cli")
def solve(instance_path, params_path, scheme, iters, runs, seed, best_known,
          registry_path, gain, d2d_cv, calibrate, trace_path, out_path, jobs):
    """Run a Boltzmann-machine ensemble on one Max-Cut instance."""
    surface, drift, params_path = _load_device_params(params_path)
    inst = read_instance(instance_path)
    if best_known is None and registry_path is not None:
        best_known = BestKnownRegistry.load(registry_path).get(inst.name)
    if best_known is not None:
        inst = dataclasses.replace(inst, best_known=best_known)
    cfg = BoltzmannConfig(
        scheme=scheme, drift=drift, max_iters=iters, runs=runs, seed=seed,
        gain=gain, d2d_cv=d2d_cv, calibrate=calibrate, jobs=jobs,
    )
    click.echo(f"seed = {seed}")
    traces, summary = ensemble(inst, cfg, surface)
    rows = [
        ResultRow(
            run_id=t.run_index, instance=inst.name, n=inst.n, scheme=scheme,
            m_hrs=drift.m_hrs, d2d_cv=d2d_cv, calibrated=calibrate, seed=seed,
            converged_at=t.converged_at, best_cut=t.best_cut,
            settling_energy=t.settling_energy, iterations=t.iterations,
            clamp_events=t.clamp_events,
        )
        for t in traces
    ]
    write_results(out_path, rows)
    if trace_path is not None:
        with open(trace_path, "w", encoding="utf-8") as fh:
            fh.write("run_id,iteration,energy\n")
            for t in traces:
                for k, e in enumerate(t.energies.tolist()):
                    fh.write(f"{t.run_index},{(k + 1) * t.stride},{e}\n")
    write_manifest(
        out_path + ".manifest.json", "solve",
        {**_config_dict(cfg), "instance": str(instance_path)},
        seed, params_path,
    )
    click.echo(f"best cut {summary.best_cut_max} over {summary.runs} runs -> {out_path}")


@main.command(name="sweep-drift")
@click.option("--sizes", default="25,50,125,250", show_default=True,
              help="Comma list of ladder sizes.")
@click.option("--mhrs", default="0.01", show_default=True,
              help="Comma list of fixed-input drift slopes [kOhm/cycle].")
@params_option
@click.option("--iters", type=int, default=200000, show_default=True)
@click.option("--runs", type=int, default=5, show_default=True)
@click.option("--degree", type=float, default=4.0, show_default=True)
@seed_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@jobs_option
@handle_errors("experiments")
def sweep_drift(sizes, mhrs, params_path, iters, runs, degree, seed, out_path, jobs):
    """Max meaningful iterations and solvable size per drift slope."""
    surface, drift, params_path = _load_device_params(params_path)
    size_list = [int(s) for s in sizes.split(",") if s]
    m_list = [float(m) for m in mhrs.split(",") if m]
    click.echo(f"seed = {seed}")
    cfg = BoltzmannConfig(max_iters=iters, runs=runs, seed=seed, jobs=jobs)
    ladder = build_size_ladder(size_list, cfg, surface, avg_degree=degree, seed=seed)
    import csv as _csv

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        w = _csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "m_hrs", "size", "t_conv_median", "t_meaningful",
                    "solvable", "max_solvable"])
        for m in m_list:
            dm = DriftModel(m_hrs=m, s_rw=drift.s_rw, hrs_tolerance=drift.hrs_tolerance)
            for scheme in ("fixed-input", "monitored"):
                res = max_solvable_size(
                    dm, ladder, dataclasses.replace(cfg, scheme=scheme), surface
                )
                for row in res.rows:
                    w.writerow([
                        scheme, repr(m), row.size,
                        "" if row.t_conv_median is None else repr(row.t_conv_median),
                        "" if row.t_meaningful is None else row.t_meaningful,
                        int(row.solvable), res.max_solvable,
                    ])
    write_manifest(
        out_path + ".manifest.json", "sweep-drift",
        {"sizes": size_list, "mhrs": m_list, "iters": iters, "runs": runs,
         "degree": degree, "jobs": jobs},
        seed, params_path,
    )
    click.echo(f"wrote {out_path}")


@main.command(name="sweep-d2d")
@click.option("--cv", default="0.0,0.05,0.1,0.2", show_default=True,
              help="Comma list of device-to-device cv values.")
@click.option("--nodes", type=int, default=60, show_default=True)
@click.option("--degree", type=float, default=4.0, show_default=True)
@params_option
@click.option("--iters", type=int, default=20000, show_default=True)
@click.option("--runs", type=int, default=10, show_default=True)
@seed_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@jobs_option
@handle_errors("experiments")
def sweep_d2d(cv, nodes, degree, params_path, iters, runs, seed, out_path, jobs):
    """Settling-energy error vs device-to-device variability, cal vs uncal."""
    surface, drift, params_path = _load_device_params(params_path)
    cv_list = [float(c) for c in cv.split(",") if c]
    click.echo(f"seed = {seed}")
    inst = generate_instance(nodes, degree, seed=seed)
    cfg = BoltzmannConfig(max_iters=iters, runs=runs, seed=seed, drift=drift, jobs=jobs)
    result = d2d_experiment(inst, cv_list, cfg, surface)
    import csv as _csv

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        w = _csv.writer(fh, lineterminator="\n")
        w.writerow(["cv", "error_uncalibrated", "error_calibrated",
                    "spread_uncalibrated", "spread_calibrated", "calib_failures",
                    "settling_uncalibrated", "settling_calibrated", "settling_ideal"])
        for row in result.rows:
            w.writerow([repr(row.cv), repr(row.error_uncalibrated),
                        repr(row.error_calibrated), repr(row.spread_uncalibrated),
                        repr(row.spread_calibrated), repr(row.calib_failures),
                        repr(row.settling_uncalibrated), repr(row.settling_calibrated),
                        repr(result.settling_ideal)])
    write_manifest(
        out_path + ".manifest.json", "sweep-d2d",
        {"cv": cv_list, "nodes": nodes, "degree": degree, "iters": iters,
         "runs": runs, "jobs": jobs},
        seed, params_path,
    )
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--scheme", type=click.Choice(SCHEMES), required=True)
@click.option("--cycles", type=int, default=100, show_default=True)
@params_option
@click.option("--vref", type=float, default=1.8, show_default=True)
@seed_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@handle_errors("experiments")
def cycling(scheme, cycles, params_path, vref, seed, out_path):
    """Distribution drift of one device over repeated Reset-Set cycles."""
    surface, drift, params_path = _load_device_params(params_path)
    click.echo(f"seed = {seed}")
    stats = cycling_stats(surface, drift, scheme, cycles, v_ref=vref, seed=seed)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("scheme,cycles,mu_drift,sigma_drift\n")
        fh.write(f"{scheme},{cycles},{stats.mu_drift!r},{stats.sigma_drift!r}\n")
    write_manifest(
        out_path + ".manifest.json", "cycling",
        {"scheme": scheme, "cycles": cycles, "vref": vref},
        seed, params_path,
    )
    click.echo(f"mu drift {stats.mu_drift:.4f} dec, sigma drift {stats.sigma_drift:.4f} dec")


@main.command()
@click.option("--mu-target", type=float, default=-5.0, show_default=True)
@click.option("--precision", type=float, default=0.2, show_default=True)
@click.option("--devices", type=int, default=50, show_default=True)
@click.option("--cv", type=float, default=0.2, show_default=True)
@params_option
@click.option("--vref", type=float, default=1.8, show_default=True)
@seed_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@handle_errors("device_model")
def calibrate(mu_target, precision, devices, cv, params_path, vref, seed, out_path):
    """Per-device HRS calibration demo: mu_eff before/after tuning."""
    surface, drift, params_path = _load_device_params(params_path)
    click.echo(f"seed = {seed}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    nominal = surface.hrs_for_mu(mu_target, vref)
    offsets = rng.standard_normal(devices) * (cv * abs(mu_target))
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("device,mu_offset,mu_before,mu_after,hrs_target,attained\n")
        for d in range(devices):
            off = float(offsets[d])
            dev = NeuronDevice(surface=surface, hrs=nominal, mu_offset=off)
            before = dev.mu_eff(vref)
            try:
                r_star = dev.calibrate(mu_target, vref, precision, rng)
                after = dev.mu_eff(vref)
                fh.write(f"{d},{off!r},{before!r},{after!r},{r_star!r},1\n")
            except StochAnnealError:
                fh.write(f"{d},{off!r},{before!r},,,0\n")
    write_manifest(
        out_path + ".manifest.json", "calibrate",
        {"mu_target": mu_target, "precision": precision, "devices": devices,
         "cv": cv, "vref": vref},
        seed, params_path,
    )
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--data", "data_path", type=click.Path(), required=True,
              help="Measurement CSV with header v_set,hrs_kohm,t_set_s.")
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Fitted device parameter JSON.")
@handle_errors("surface")
def fit(data_path, out_path):
    """Fit mu/sigma surfaces from a measurement campaign."""
    samples = read_measurements(data_path)
    surface, r_squared = fit_surface(samples)
    save_params(out_path, surface, DriftModel())
    click.echo(f"R^2 = {r_squared}")
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--nodes", type=int, required=True)
@click.option("--degree", type=float, default=4.0, show_default=True)
@click.option("--weights", type=click.Choice(["pm1", "plus1"]), default="pm1",
              show_default=True, help="pm1: weights in {-1,+1}; plus1: all +1.")
@seed_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--register", "registry_path", type=click.Path(), default=None,
              help="Registry JSON to update (exact entry when nodes <= 20).")
@handle_errors("io_ingest")
def gen(nodes, degree, weights, seed, out_path, registry_path):
    """Generate a random benchmark instance."""
    wset = (-1, 1) if weights == "pm1" else (1,)
    click.echo(f"seed = {seed}")
    # name by the output file stem so registry lookups made on the re-read
    # file (which is named by its basename) resolve
    stem = os.path.splitext(os.path.basename(out_path))[0]
    inst = generate_instance(nodes, degree, weight_set=wset, seed=seed, name=stem)
    write_instance(out_path, inst)
    if registry_path is not None and nodes <= 20:
        cut, _ = brute_force_maxcut(inst)
        try:
            registry = BestKnownRegistry.load(registry_path)
        except FileNotFoundError:
            registry = BestKnownRegistry()
        registry.set_entry(inst.name, cut, "exact")
        registry.save(registry_path)
        click.echo(f"registered exact best-known {cut}")
    click.echo(f"wrote {out_path} ({inst.n} nodes, {inst.m} edges)")


@main.command()
@click.option("--instance", "instance_path", type=click.Path(), required=True)
@handle_errors("io_ingest")
def brute(instance_path):
    """Exact Max-Cut by enumeration (n <= 20)."""
    inst = read_instance(instance_path)
    cut, x = brute_force_maxcut(inst)
    click.echo(f"{cut}")
    click.echo(f"x = {''.join(str(int(b)) for b in x)}", err=True)


if __name__ == "__main__":
    main()
