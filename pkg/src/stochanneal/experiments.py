"""Scripted simulation studies: cycling drift, size scaling, d2d variability.

Every comparison here is paired: arms that differ in one manipulated variable
(drift on/off, calibrated or not) share the same seed, and the sampler's
stream split guarantees they see identical node picks and Bernoulli
thresholds. Differences in outcomes are attributable to the manipulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .device import SCHEME_FIXED, SCHEME_IDEAL, DriftModel, NeuronDevice
from .errors import InsufficientTraces, MissingBestKnown
from .io_ingest import brute_force_maxcut, generate_instance
from .maxcut import MaxCutInstance
from .sampler import (
    BoltzmannConfig,
    RunTrace,
    ensemble,
    moving_average,
    run,
)
from .surface import DeviceSurface

# default smoothing width as a fraction of the recorded series length
SMOOTH_FRACTION = 0.02


# -- cycling statistics (distribution drift) ------------------------------------


@dataclass
class CyclingStats:
    mu_drift: float        # decades
    sigma_drift: float     # decades
    mu_series: np.ndarray  # mu_eff after each cycle (index 0 = pristine)


def cycling_stats(
    surface: DeviceSurface,
    drift: DriftModel,
    scheme: str,
    cycles: int,
    *,
    v_ref: float = 1.8,
    hrs: Optional[float] = None,
    mu_target: float = -5.0,
    window: Optional[int] = None,
    seed: int = 0,
) -> CyclingStats:
    """Drift of the log-time distribution over repeated Reset-Set cycles.

    One device is cycled `cycles` times under `scheme`, recording its exact
    mu_eff(v_ref) after every cycle. The reported mu drift compares the mean
    over the first and last `window` cycles (default cycles // 5): the
    monitored scheme re-draws HRS inside the verify band every cycle, so the
    distribution's location is the windowed mean, not any single draw. The
    sigma drift compares the running standard deviation of the recorded
    series over the first window against the full record.
    """
    if cycles < 2:
        raise ValueError("need at least 2 cycles")
    if hrs is None:
        hrs = surface.hrs_for_mu(mu_target, v_ref)
    dev = NeuronDevice(surface=surface, hrs=hrs, scheme=scheme, target_hrs=hrs)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    series = np.empty(cycles + 1)
    series[0] = dev.mu_eff(v_ref)
    for c in range(cycles):
        dev.apply_cycle(drift, rng)
        series[c + 1] = dev.mu_eff(v_ref)
    if series.max() == series.min():
        # untouched state: exactly zero, no float residue from np.std
        return CyclingStats(mu_drift=0.0, sigma_drift=0.0, mu_series=series)
    w = window if window is not None else max(2, cycles // 5)
    w = min(w, cycles)
    mu_drift = float(abs(series[-w:].mean() - series[:w].mean()))
    sigma_drift = float(abs(series.std() - series[:w].std()))
    return CyclingStats(mu_drift=mu_drift, sigma_drift=sigma_drift, mu_series=series)


# -- ensemble energy handling ---------------------------------------------------


def ensemble_mean_energy(traces: Sequence[RunTrace]) -> tuple[np.ndarray, int]:
    """Mean instantaneous-energy series over runs; returns (series, stride)."""
    if not traces:
        raise InsufficientTraces("no traces")
    stride = traces[0].stride
    length = min(t.energies.size for t in traces)
    if length == 0:
        raise InsufficientTraces("traces carry no recorded energies")
    if any(t.stride != stride for t in traces):
        raise ValueError("traces disagree on energy stride")
    stack = np.stack([t.energies[:length] for t in traces]).astype(float)
    return stack.mean(axis=0), stride


def max_meaningful_iterations(
    traces: Sequence[RunTrace],
    window: Optional[int] = None,
    *,
    plateau_tolerance: float = 0.01,
) -> int:
    """Iteration beyond which the ensemble-mean energy stops improving.

    Smooths the mean energy with a centered moving average and returns the
    iteration count of the last point still within plateau_tolerance * |min|
    of the smoothed minimum: once a run sits on its settling plateau the
    minimum itself is sampling noise, and the meaningful budget is the end of
    the plateau, not a random dip inside it. A strictly descending series
    maps to the last iteration.
    """
    if len(traces) < 5:
        raise InsufficientTraces(f"need >= 5 traces, got {len(traces)}")
    mean_series, stride = ensemble_mean_energy(traces)
    if window is None:
        window = max(1, int(round(SMOOTH_FRACTION * mean_series.size)))
    if window < 1:
        raise ValueError("window must be >= 1")
    smoothed = moving_average(mean_series, window)
    lowest = float(smoothed.min())
    band = lowest + plateau_tolerance * abs(lowest)
    last_at_min = int(np.nonzero(smoothed <= band)[0][-1])
    return (last_at_min + 1) * stride


def settling_energy_ensemble(traces: Sequence[RunTrace], window: Optional[int] = None) -> float:
    """Minimum of the smoothed ensemble-mean energy series."""
    mean_series, _ = ensemble_mean_energy(traces)
    if window is None:
        window = max(1, int(round(SMOOTH_FRACTION * mean_series.size)))
    return float(moving_average(mean_series, window).min())


# -- convergence scaling (problem size sweep) -------------------------------------


@dataclass
class ScalingRow:
    instance: str
    n: int
    converged: list
    converged_count: int
    runs: int

    @property
    def median(self) -> Optional[float]:
        return float(np.median(self.converged)) if self.converged else None


def convergence_scaling(
    instances: Sequence[MaxCutInstance],
    cfg: BoltzmannConfig,
    surface: DeviceSurface,
) -> list[ScalingRow]:
    """Iterations to converge within cfg.convergence_fraction of best-known,
    ideal scheme, one ensemble per instance."""
    for inst in instances:
        if inst.best_known is None:
            raise MissingBestKnown(f"instance {inst.name!r} lacks a best-known cut")
    rows = []
    run_cfg = replace(cfg, scheme=SCHEME_IDEAL, stop_on_convergence=True)
    for inst in instances:
        traces, _ = ensemble(inst, run_cfg, surface)
        conv = [t.converged_at for t in traces if t.converged_at is not None]
        rows.append(
            ScalingRow(
                instance=inst.name,
                n=inst.n,
                converged=conv,
                converged_count=len(conv),
                runs=len(traces),
            )
        )
    return rows


def spearman_trend(xs: Sequence[float], ys: Sequence[float]) -> float:
    from scipy.stats import spearmanr

    rho = spearmanr(xs, ys).statistic
    return float(rho)


# -- drift sweep / solvable size ----------------------------------------------------


@dataclass
class SizeRow:
    size: int
    t_conv_median: Optional[float]   # iterations, ideal scheme
    t_meaningful: Optional[int]      # iterations, scheme under test
    solvable: bool


@dataclass
class SolvableResult:
    scheme: str
    m_hrs: float
    rows: list
    max_solvable: int


def max_solvable_size(
    drift: DriftModel,
    ladder: Sequence[tuple[int, Sequence[MaxCutInstance]]],
    cfg: BoltzmannConfig,
    surface: DeviceSurface,
    *,
    horizon_factor: float = 4.0,
) -> SolvableResult:
    """Largest ladder size whose ideal-scheme convergence fits inside the
    meaningful-iteration budget of cfg.scheme under `drift`.

    For non-drifting schemes (ideal, monitored) the energy never stops
    improving by construction and the budget is cfg.max_iters. For the
    fixed-input scheme the budget is measured: ensembles run under drift for
    min(cfg.max_iters, horizon_factor * t_conv) iterations and the smoothed
    ensemble-mean energy argmin is taken.
    """
    sizes = [s for s, _ in ladder]
    if sizes != sorted(sizes):
        raise ValueError("ladder sizes must be ascending")
    rows = []
    for size, instances in ladder:
        for inst in instances:
            if inst.best_known is None:
                raise MissingBestKnown(f"ladder instance {inst.name!r} lacks best_known")
        scaling = convergence_scaling(instances, cfg, surface)
        conv = [c for row in scaling for c in row.converged]
        total_runs = sum(row.runs for row in scaling)
        if len(conv) < max(1, total_runs // 2 + 1):
            # the median run never converged inside cfg.max_iters
            rows.append(SizeRow(size=size, t_conv_median=None, t_meaningful=None, solvable=False))
            continue
        # median over all runs, counting non-converged as +inf
        padded = conv + [math.inf] * (total_runs - len(conv))
        t_conv = float(np.median(padded))
        if not math.isfinite(t_conv):
            rows.append(SizeRow(size=size, t_conv_median=None, t_meaningful=None, solvable=False))
            continue
        if cfg.scheme != SCHEME_FIXED:
            t_mm = cfg.max_iters
        else:
            horizon = int(min(cfg.max_iters, max(horizon_factor * t_conv, 2000)))
            drift_cfg = replace(
                cfg,
                scheme=SCHEME_FIXED,
                drift=drift,
                stop_on_convergence=False,
                max_iters=horizon,
            )
            traces = []
            for inst in instances:
                ts, _ = ensemble(inst, drift_cfg, surface)
                traces.extend(ts)
            t_mm = max_meaningful_iterations(traces)
        rows.append(
            SizeRow(
                size=size,
                t_conv_median=t_conv,
                t_meaningful=t_mm,
                solvable=t_conv <= t_mm,
            )
        )
    max_solvable = max((r.size for r in rows if r.solvable), default=0)
    return SolvableResult(scheme=cfg.scheme, m_hrs=drift.m_hrs, rows=rows, max_solvable=max_solvable)


# -- device-to-device variability sweep -----------------------------------------------


@dataclass
class D2DRow:
    cv: float
    error_uncalibrated: float   # settling-energy error % vs ideal
    error_calibrated: float
    spread_uncalibrated: float  # std of per-device mu_eff [decades]
    spread_calibrated: float
    calib_failures: float       # mean dropped devices per run
    settling_uncalibrated: float
    settling_calibrated: float


@dataclass
class D2DSweepResult:
    settling_ideal: float
    rows: list


def d2d_experiment(
    inst: MaxCutInstance,
    cv_list: Sequence[float],
    cfg: BoltzmannConfig,
    surface: DeviceSurface,
) -> D2DSweepResult:
    """Settling-energy penalty of device-to-device spread, with and without
    per-device HRS calibration, against a cv = 0 baseline on paired seeds."""
    if cfg.runs < 10:
        raise ValueError("d2d_experiment needs cfg.runs >= 10")
    base = replace(cfg, stop_on_convergence=False)
    ideal_traces, _ = ensemble(inst, replace(base, d2d_cv=0.0, calibrate=False), surface)
    e_ideal = settling_energy_ensemble(ideal_traces)
    denom = max(abs(e_ideal), 1e-12)

    rows = []
    for cv in cv_list:
        arms = {}
        for label, calibrated in (("uncal", False), ("cal", True)):
            traces, _ = ensemble(
                inst, replace(base, d2d_cv=cv, calibrate=calibrated), surface
            )
            arms[label] = traces
        e_uncal = settling_energy_ensemble(arms["uncal"])
        e_cal = settling_energy_ensemble(arms["cal"])
        rows.append(
            D2DRow(
                cv=cv,
                error_uncalibrated=100.0 * max(0.0, e_uncal - e_ideal) / denom,
                error_calibrated=100.0 * max(0.0, e_cal - e_ideal) / denom,
                spread_uncalibrated=float(np.mean([t.mu_eff_spread for t in arms["uncal"]])),
                spread_calibrated=float(np.mean([t.mu_eff_spread for t in arms["cal"]])),
                calib_failures=float(np.mean([t.calib_failures for t in arms["cal"]])),
                settling_uncalibrated=e_uncal,
                settling_calibrated=e_cal,
            )
        )
    return D2DSweepResult(settling_ideal=e_ideal, rows=rows)


# -- benchmark ladder -------------------------------------------------------------------


def _instance_seed(base_seed: int, size: int, k: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(size, k))
    return int(ss.generate_state(1)[0])


def proxy_best_known(
    inst: MaxCutInstance,
    cfg: BoltzmannConfig,
    surface: DeviceSurface,
    *,
    runs: int = 3,
    max_iters: Optional[int] = None,
) -> int:
    """Best cut of a long ideal-scheme reference ensemble (registry 'proxy')."""
    if max_iters is None:
        max_iters = min(cfg.max_iters, int(200 * inst.n * max(math.log(inst.n), 1.0)))
    proxy_cfg = replace(
        cfg,
        scheme=SCHEME_IDEAL,
        d2d_cv=0.0,
        calibrate=False,
        stop_on_convergence=False,
        runs=runs,
        max_iters=max_iters,
    )
    best = -(10**18)
    for r in range(runs):
        trace = run(inst, proxy_cfg, surface, run_index=r)
        best = max(best, trace.best_cut)
    return int(best)


def build_size_ladder(
    sizes: Sequence[int],
    cfg: BoltzmannConfig,
    surface: DeviceSurface,
    *,
    avg_degree: float = 4.0,
    instances_per_size: int = 1,
    seed: int = 1234,
    registry=None,
) -> list[tuple[int, list[MaxCutInstance]]]:
    """Random benchmark instances per size with best-known cuts attached.

    Sizes <= 20 get exact brute-force optima; larger sizes get a long-run
    proxy. Provenances land in `registry` when one is passed.
    """
    ladder = []
    for size in sorted(sizes):
        insts = []
        for k in range(instances_per_size):
            inst = generate_instance(
                size, avg_degree, weight_set=(-1, 1), seed=_instance_seed(seed, size, k)
            )
            if size <= 20:
                cut, _ = brute_force_maxcut(inst)
                provenance = "exact"
            else:
                cut = proxy_best_known(inst, cfg, surface)
                provenance = "proxy"
            inst = replace(inst, best_known=cut)
            if registry is not None:
                registry.set_entry(inst.name, cut, provenance)
            insts.append(inst)
        ladder.append((size, insts))
    return ladder
