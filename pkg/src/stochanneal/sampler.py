"""Boltzmann-machine SGD loop driven by stochastic RRAM neurons.

One iteration samples exactly one neuron: the node's local field u_i is
mapped to a Set-pulse voltage, the device's switching probability at the
shared pulse width decides x_i in {0, 1} (assignment, not flip), the local
fields are repaired incrementally, and the sampled device undergoes one
Reset-Set cycle under its management scheme.

Reproducibility contract: a run is a pure function of (instance, config,
seed, run_index). Randomness is split into five independent child streams of
numpy's SeedSequence(seed, spawn_key=(run_index,)) - initial configuration,
device offsets, calibration noise, loop draws (node picks + Bernoulli
thresholds), and scheme actuator noise - so paired comparisons (ideal vs
drifting, calibrated vs not) see identical loop dynamics.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .device import SCHEME_FIXED, SCHEME_IDEAL, SCHEME_MONITORED, SCHEMES, DriftModel
from .errors import MissingBestKnown, NonMonotone, Unattainable
from .maxcut import BoltzmannForm, MaxCutInstance, build_form, init_fields
from .maxcut import energy as energy_of
from .surface import DeviceSurface

_RNG_BLOCK = 8192
_SQRT1_2 = 1.0 / math.sqrt(2.0)

SELECTION_UNIFORM = "uniform"
SELECTION_ROUND_ROBIN = "round-robin"
ACTIVATION_DEVICE = "device"
ACTIVATION_LOGISTIC = "logistic"


@dataclass
class BoltzmannConfig:
    """Everything a run needs besides the instance and the fitted surface."""

    v_center: float = 1.8
    v_min: float = 1.6
    v_max: float = 2.2
    gain: float = 0.2              # volts per unit of normalized field
    t_pw: Optional[float] = None   # None: centered at (v_center, nominal HRS)
    mu_target: float = -5.0        # nominal log10 Set-time the neurons bias to
    nominal_hrs: Optional[float] = None  # None: solve mu_target at v_center
    max_iters: int = 10_000
    runs: int = 1
    seed: int = 0
    scheme: str = SCHEME_IDEAL
    drift: DriftModel = field(default_factory=DriftModel)
    d2d_cv: float = 0.0            # fractional std of per-device mu offset
    calibrate: bool = False
    calibration_precision: float = 0.2
    convergence_fraction: float = 0.9
    selection: str = SELECTION_UNIFORM
    activation: str = ACTIVATION_DEVICE
    u_scale_percentile: float = 95.0
    stop_on_convergence: bool = False
    energy_stride: Optional[int] = None  # None: 1 if n <= 512 else n
    gain_final: Optional[float] = None   # optional linear gain schedule, off
    jobs: int = 1

    def __post_init__(self):
        if not self.v_min <= self.v_center <= self.v_max:
            raise ValueError("need v_min <= v_center <= v_max")
        if self.gain <= 0:
            raise ValueError("gain must be > 0")
        if not 0.0 < self.convergence_fraction <= 1.0:
            raise ValueError("convergence_fraction must be in (0, 1]")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.selection not in (SELECTION_UNIFORM, SELECTION_ROUND_ROBIN):
            raise ValueError(f"unknown selection {self.selection!r}")
        if self.activation not in (ACTIVATION_DEVICE, ACTIVATION_LOGISTIC):
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class RunTrace:
    """Per-run record: energy series plus summary statistics."""

    energies: np.ndarray            # recorded every `stride` iterations
    stride: int
    best_cut: int
    best_x: np.ndarray
    converged_at: Optional[int]
    settling_energy: float
    iterations: int
    cycles_per_device: np.ndarray
    clamp_events: int
    mu_eff_spread: float
    calib_failures: int
    u_scale: float
    seed: int
    run_index: int


@dataclass
class EnsembleSummary:
    runs: int
    converged_count: int
    converged_median: Optional[float]
    converged_q25: Optional[float]
    converged_q75: Optional[float]
    best_cut_median: float
    best_cut_min: int
    best_cut_max: int
    settling_mean: float
    settling_median: float


def map_field_to_voltage(cfg: BoltzmannConfig, u_i: float, u_scale: float) -> float:
    """Scale/shift a local field into the device input window (clamped)."""
    if u_scale <= 0:
        raise ValueError("u_scale must be > 0")
    v = cfg.v_center + cfg.gain * (u_i / u_scale)
    return min(max(v, cfg.v_min), cfg.v_max)


def moving_average(series, window: int) -> np.ndarray:
    """Centered moving average with edge-truncated windows."""
    a = np.asarray(series, dtype=float)
    if window <= 1 or a.size == 0:
        return a.astype(float, copy=True)
    lo_span = (window - 1) // 2
    hi_span = window // 2
    csum = np.concatenate([[0.0], np.cumsum(a)])
    idx = np.arange(a.size)
    lo = np.maximum(idx - lo_span, 0)
    hi = np.minimum(idx + hi_span + 1, a.size)
    return (csum[hi] - csum[lo]) / (hi - lo)


def settling_energy_of(series, window: Optional[int] = None) -> float:
    """Minimum of the smoothed energy series (default window: 2% of length)."""
    a = np.asarray(series, dtype=float)
    if a.size == 0:
        return math.nan
    if window is None:
        window = max(1, a.size // 50)
    return float(moving_average(a, window).min())


class RunState:
    """Mutable state of one run; `step` advances it one iteration."""

    __slots__ = (
        "n", "x", "u", "energy", "indptr", "indices", "wts",
        "hrs", "offs", "targets", "cyc", "clamps",
        "scheme_code", "m_hrs", "s_rw", "tol", "r_lo", "r_hi",
        "mc00", "mc10", "mc01", "mc20", "mc02", "mc11",
        "sc00", "sc10", "sc01", "sc20", "sc02", "sc11", "floor",
        "vc", "vmin", "vmax", "gain", "gain_final", "inv_uscale", "log_tpw",
        "logistic", "round_robin",
        "rng_loop", "rng_scheme", "nodes", "unifs", "noise", "cursor", "block",
        "t", "max_iters", "trace", "stride",
        "best_energy", "best_x", "converged_at", "threshold", "stop_on_conv",
        "u_scale", "t_pw", "calib_failures", "mu_eff_spread",
    )

    def _refill(self) -> None:
        b = self.block
        if self.round_robin:
            self.nodes = None
        else:
            self.nodes = self.rng_loop.integers(0, self.n, b).tolist()
        self.unifs = self.rng_loop.random(b).tolist()
        if self.scheme_code == 1:
            self.noise = self.rng_scheme.standard_normal(b).tolist()
        elif self.scheme_code == 2:
            self.noise = self.rng_scheme.uniform(-self.tol, self.tol, b).tolist()
        else:
            self.noise = None
        self.cursor = 0


def step(state: RunState) -> None:
    """Advance one iteration: sample one neuron, cycle its device."""
    _advance(state, 1)


def _advance(state: RunState, steps: int) -> int:
    """Run up to `steps` iterations; returns the number executed.

    Stops early when the convergence threshold is hit and the run was asked
    to. This is the only place the sampling dynamics are written down.
    """
    x, u = state.x, state.u
    indptr, indices, wts = state.indptr, state.indices, state.wts
    hrs, offs, cyc = state.hrs, state.offs, state.cyc
    scheme = state.scheme_code
    m_hrs, s_rw = state.m_hrs, state.s_rw
    r_lo, r_hi = state.r_lo, state.r_hi
    targets = state.targets
    mc00, mc10, mc01 = state.mc00, state.mc10, state.mc01
    mc20, mc02, mc11 = state.mc20, state.mc02, state.mc11
    sc00, sc10, sc01 = state.sc00, state.sc10, state.sc01
    sc20, sc02, sc11 = state.sc20, state.sc02, state.sc11
    floor = state.floor
    vc, vmin, vmax = state.vc, state.vmin, state.vmax
    inv_uscale, log_tpw = state.inv_uscale, state.log_tpw
    logistic = state.logistic
    round_robin = state.round_robin
    gain = state.gain
    sched = state.gain_final is not None
    stride = state.stride
    trace = state.trace
    erf, exp = math.erf, math.exp
    threshold = state.threshold
    energy = state.energy
    best_energy = state.best_energy
    t = state.t
    n = state.n
    max_iters = state.max_iters
    executed = 0

    while executed < steps:
        k = state.cursor
        if state.unifs is None or k >= state.block:
            state._refill()
            k = 0
        if round_robin:
            i = t % n
        else:
            i = state.nodes[k]
        u_i = u[i]

        if logistic:
            p = 1.0 / (1.0 + exp(-u_i)) if u_i > -500 else 0.0
        else:
            if sched:
                gain = state.gain + (state.gain_final - state.gain) * (t / max_iters)
            v = vc + gain * u_i * inv_uscale
            if v < vmin:
                v = vmin
            elif v > vmax:
                v = vmax
            r = hrs[i]
            mu = (mc10 + mc20 * v + mc11 * r) * v + (mc01 + mc02 * r) * r + mc00 + offs[i]
            sg = (sc10 + sc20 * v + sc11 * r) * v + (sc01 + sc02 * r) * r + sc00
            if sg < floor:
                sg = floor
            p = 0.5 * (1.0 + erf((log_tpw - mu) * _SQRT1_2 / sg))

        new = 1 if state.unifs[k] < p else 0
        old = x[i]
        if new != old:
            delta = new - old
            x[i] = new
            for kk in range(indptr[i], indptr[i + 1]):
                u[indices[kk]] += wts[kk] * delta
            energy -= u_i * delta
            if energy < best_energy:
                best_energy = energy
                state.best_x = x.copy()
                if threshold is not None and state.converged_at is None:
                    if -energy >= threshold:
                        state.converged_at = t + 1

        # one Reset-Set per sampling
        cyc[i] += 1
        if scheme == 1:
            nh = hrs[i] + m_hrs + s_rw * state.noise[k]
            if nh < r_lo:
                nh = r_lo
                state.clamps += 1
            elif nh > r_hi:
                nh = r_hi
                state.clamps += 1
            hrs[i] = nh
        elif scheme == 2:
            nh = targets[i] * (1.0 + state.noise[k])
            if nh < r_lo:
                nh = r_lo
                state.clamps += 1
            elif nh > r_hi:
                nh = r_hi
                state.clamps += 1
            hrs[i] = nh

        state.cursor = k + 1
        t += 1
        executed += 1
        if t % stride == 0:
            trace.append(energy)
        if state.stop_on_conv and state.converged_at is not None:
            break

    state.energy = energy
    state.best_energy = best_energy
    state.t = t
    return executed


def _nominal_hrs(surface: DeviceSurface, cfg: BoltzmannConfig) -> float:
    if cfg.nominal_hrs is not None:
        return float(cfg.nominal_hrs)
    try:
        return surface.hrs_for_mu(cfg.mu_target, cfg.v_center)
    except (Unattainable, NonMonotone):
        # toy surfaces (constant mu etc.) have no -5 decade point; run at
        # the middle of the fitted window instead
        return 0.5 * (surface.r_range[0] + surface.r_range[1])


def make_state(
    inst: MaxCutInstance,
    cfg: BoltzmannConfig,
    surface: DeviceSurface,
    run_index: int = 0,
    form: Optional[BoltzmannForm] = None,
) -> RunState:
    """Build the initial RunState for (instance, config, surface, run_index)."""
    if inst.n < 1:
        raise ValueError("instance must have at least one node")
    if not (surface.v_range[0] <= cfg.v_min and cfg.v_max <= surface.v_range[1]):
        raise ValueError(
            f"voltage window [{cfg.v_min}, {cfg.v_max}] escapes the fitted "
            f"surface range {surface.v_range}"
        )
    if form is None:
        form = build_form(inst)
    n = inst.n
    root = np.random.SeedSequence(cfg.seed, spawn_key=(run_index,))
    ss_init, ss_dev, ss_cal, ss_loop, ss_scheme = root.spawn(5)

    rng_init = np.random.default_rng(ss_init)
    x = rng_init.integers(0, 2, n).tolist()
    u = init_fields(form, x)
    u_scale = float(np.percentile(np.abs(np.asarray(u, dtype=float)), cfg.u_scale_percentile))
    if u_scale <= 0:
        u_scale = 1.0

    nominal = _nominal_hrs(surface, cfg)
    nominal = surface.clamp_hrs(nominal)
    rng_dev = np.random.default_rng(ss_dev)
    if cfg.d2d_cv > 0:
        offs = (rng_dev.standard_normal(n) * (cfg.d2d_cv * abs(cfg.mu_target))).tolist()
    else:
        offs = [0.0] * n

    hrs = [nominal] * n
    targets = [nominal] * n
    clamps = 0
    calib_failures = 0
    if cfg.calibrate:
        rng_cal = np.random.default_rng(ss_cal)
        jitter = rng_cal.uniform(-cfg.calibration_precision, cfg.calibration_precision, n)
        calibrated_mu = []
        for i in range(n):
            want = cfg.mu_target - offs[i]
            try:
                r_star = surface.hrs_for_mu(want, cfg.v_center)
                ok = True
            except Unattainable:
                # best effort: park at the window end whose mu is closest
                lo_mu = float(surface.eval_mu(cfg.v_center, surface.r_range[0]))
                hi_mu = float(surface.eval_mu(cfg.v_center, surface.r_range[1]))
                r_star = (
                    surface.r_range[0]
                    if abs(lo_mu - want) <= abs(hi_mu - want)
                    else surface.r_range[1]
                )
                calib_failures += 1
                ok = False
            realized = r_star * (1.0 + jitter[i])
            clamped = surface.clamp_hrs(realized)
            if clamped != realized:
                clamps += 1
            hrs[i] = targets[i] = clamped
            if ok:
                calibrated_mu.append(float(surface.eval_mu(cfg.v_center, clamped)) + offs[i])
        spread_pop = calibrated_mu if calibrated_mu else [
            float(surface.eval_mu(cfg.v_center, hrs[i])) + offs[i] for i in range(n)
        ]
        if calib_failures:
            warnings.warn(
                f"{calib_failures}/{n} devices have offsets outside the tunable "
                "window; parked at the nearest HRS bound and excluded from the "
                "calibrated-spread statistic"
            )
    else:
        spread_pop = [float(surface.eval_mu(cfg.v_center, hrs[i])) + offs[i] for i in range(n)]
    mu_eff_spread = float(np.std(spread_pop)) if len(spread_pop) > 1 else 0.0

    t_pw = cfg.t_pw if cfg.t_pw is not None else surface.center_pulse_width(cfg.v_center, nominal)
    if t_pw <= 0:
        raise ValueError("t_pw must be > 0")

    stride = cfg.energy_stride if cfg.energy_stride is not None else (1 if n <= 512 else n)

    st = RunState()
    st.n = n
    st.x = x
    st.u = u
    st.indptr = form.indptr.tolist()
    st.indices = form.indices.tolist()
    st.wts = form.weights.tolist()
    st.hrs = hrs
    st.offs = offs
    st.targets = targets
    st.cyc = [0] * n
    st.clamps = clamps
    st.scheme_code = {SCHEME_IDEAL: 0, SCHEME_FIXED: 1, SCHEME_MONITORED: 2}[cfg.scheme]
    st.m_hrs = cfg.drift.m_hrs
    st.s_rw = cfg.drift.s_rw
    st.tol = cfg.drift.hrs_tolerance
    st.r_lo, st.r_hi = surface.r_range
    (st.mc00, st.mc10, st.mc01, st.mc20, st.mc02, st.mc11) = surface.mu_coeffs
    (st.sc00, st.sc10, st.sc01, st.sc20, st.sc02, st.sc11) = surface.sigma_coeffs
    st.floor = surface.sigma_floor
    st.vc, st.vmin, st.vmax = cfg.v_center, cfg.v_min, cfg.v_max
    st.gain = cfg.gain
    st.gain_final = cfg.gain_final
    st.inv_uscale = 1.0 / u_scale
    st.log_tpw = math.log10(t_pw)
    st.logistic = cfg.activation == ACTIVATION_LOGISTIC
    st.round_robin = cfg.selection == SELECTION_ROUND_ROBIN
    st.rng_loop = np.random.default_rng(ss_loop)
    st.rng_scheme = np.random.default_rng(ss_scheme)
    st.nodes = st.unifs = st.noise = None
    st.cursor = 0
    st.block = _RNG_BLOCK
    st.t = 0
    st.max_iters = cfg.max_iters
    st.trace = []
    st.stride = stride
    e0 = energy_of(form, x)
    st.energy = e0
    st.best_energy = e0
    st.best_x = x.copy()
    if inst.best_known is not None:
        st.threshold = cfg.convergence_fraction * inst.best_known
        st.converged_at = 0 if -e0 >= st.threshold else None
    else:
        if cfg.stop_on_convergence:
            raise MissingBestKnown(
                f"instance {inst.name!r} has no best-known cut; convergence "
                "stopping needs one"
            )
        st.threshold = None
        st.converged_at = None
    st.stop_on_conv = cfg.stop_on_convergence
    st.u_scale = u_scale
    st.t_pw = t_pw
    st.calib_failures = calib_failures
    st.mu_eff_spread = mu_eff_spread
    return st


def run(
    inst: MaxCutInstance,
    cfg: BoltzmannConfig,
    surface: DeviceSurface,
    run_index: int = 0,
) -> RunTrace:
    """Execute one seeded run; fully reproducible from (cfg.seed, run_index)."""
    state = make_state(inst, cfg, surface, run_index)
    _advance(state, cfg.max_iters)
    energies = np.asarray(state.trace, dtype=np.int64)
    return RunTrace(
        energies=energies,
        stride=state.stride,
        best_cut=-state.best_energy,
        best_x=np.asarray(state.best_x, dtype=np.uint8),
        converged_at=state.converged_at,
        settling_energy=settling_energy_of(energies),
        iterations=state.t,
        cycles_per_device=np.asarray(state.cyc, dtype=np.int64),
        clamp_events=state.clamps,
        mu_eff_spread=state.mu_eff_spread,
        calib_failures=state.calib_failures,
        u_scale=state.u_scale,
        seed=cfg.seed,
        run_index=run_index,
    )


def _ensemble_worker(args) -> RunTrace:
    inst, cfg, surface, idx = args
    return run(inst, cfg, surface, run_index=idx)


def summarize(traces: Sequence[RunTrace]) -> EnsembleSummary:
    conv = [t.converged_at for t in traces if t.converged_at is not None]
    cuts = [t.best_cut for t in traces]
    settle = [t.settling_energy for t in traces]
    return EnsembleSummary(
        runs=len(traces),
        converged_count=len(conv),
        converged_median=float(np.median(conv)) if conv else None,
        converged_q25=float(np.percentile(conv, 25)) if conv else None,
        converged_q75=float(np.percentile(conv, 75)) if conv else None,
        best_cut_median=float(np.median(cuts)),
        best_cut_min=int(min(cuts)),
        best_cut_max=int(max(cuts)),
        settling_mean=float(np.mean(settle)),
        settling_median=float(np.median(settle)),
    )


def ensemble(
    inst: MaxCutInstance,
    cfg: BoltzmannConfig,
    surface: DeviceSurface,
) -> tuple[list[RunTrace], EnsembleSummary]:
    """cfg.runs independent runs with derived child seeds; order-stable."""
    if cfg.runs < 1:
        raise ValueError("runs must be >= 1")
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            traces = list(
                pool.map(_ensemble_worker, [(inst, cfg, surface, r) for r in range(cfg.runs)])
            )
    else:
        traces = [run(inst, cfg, surface, run_index=r) for r in range(cfg.runs)]
    return traces, summarize(traces)
