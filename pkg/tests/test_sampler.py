import math

import numpy as np
import pytest

from stochanneal.device import NeuronDevice
from stochanneal.errors import MissingBestKnown
from stochanneal.io_ingest import generate_instance
from stochanneal.maxcut import MaxCutInstance
from stochanneal.sampler import (
    BoltzmannConfig,
    ensemble,
    make_state,
    map_field_to_voltage,
    moving_average,
    run,
    step,
)


class TestMapFieldToVoltage:
    def test_zero_field_is_center(self):
        cfg = BoltzmannConfig()
        assert map_field_to_voltage(cfg, 0.0, 4.0) == 1.8

    def test_clamps_at_window(self):
        cfg = BoltzmannConfig()
        assert map_field_to_voltage(cfg, 1e9, 4.0) == 2.2
        assert map_field_to_voltage(cfg, -1e9, 4.0) == 1.6

    def test_arithmetic(self):
        cfg = BoltzmannConfig(gain=0.2)
        assert map_field_to_voltage(cfg, 5.0, 10.0) == pytest.approx(1.9, abs=1e-12)

    def test_monotone(self):
        cfg = BoltzmannConfig()
        us = np.linspace(-50, 50, 101)
        vs = [map_field_to_voltage(cfg, u, 8.0) for u in us]
        assert all(b >= a for a, b in zip(vs, vs[1:]))

    def test_u_scale_must_be_positive(self):
        with pytest.raises(ValueError):
            map_field_to_voltage(BoltzmannConfig(), 1.0, 0.0)


class TestStep:
    def test_certain_switch_when_pulse_huge(self, k3, flat_surface):
        cfg = BoltzmannConfig(t_pw=1e20, nominal_hrs=100.0, max_iters=10, seed=1)
        state = make_state(k3, cfg, flat_surface)
        for _ in range(30):
            step(state)
        assert state.x == [1, 1, 1]

    def test_thresholded_first_step_on_k3(self, k3, steep_surface):
        # near-zero sigma turns the neuron into a threshold unit; from the
        # all-zeros state every field is +2 so the first touched node must set
        cfg = BoltzmannConfig(t_pw=1e-5, nominal_hrs=100.0, max_iters=1, seed=0)
        for seed in range(20):
            state = make_state(k3, BoltzmannConfig(t_pw=1e-5, nominal_hrs=100.0,
                                                   max_iters=1, seed=seed), steep_surface)
            state.x = [0, 0, 0]
            state.u = [2, 2, 2]
            state.energy = 0
            step(state)
            assert sum(state.x) == 1

    def test_empirical_frequency_matches_p_switch(self, ref_surface, ref_drift):
        # single isolated node: u = 0 always, so every step is an independent
        # Bernoulli draw at v_center with the configured pulse width
        inst = MaxCutInstance(n=1, edges=())
        nominal = ref_surface.hrs_for_mu(-5.0, 1.8)
        dev = NeuronDevice(surface=ref_surface, hrs=nominal)
        t_pw = 10.0 ** (dev.mu_eff(1.8) - 0.25)
        cfg = BoltzmannConfig(t_pw=t_pw, max_iters=1, seed=3, drift=ref_drift)
        state = make_state(inst, cfg, ref_surface)
        hits = 0
        trials = 100_000
        for _ in range(trials):
            step(state)
            hits += state.x[0]
        assert hits / trials == pytest.approx(dev.p_switch(1.8, t_pw), abs=0.01)

    def test_one_cycle_per_step(self, k3, ref_surface, ref_drift):
        cfg = BoltzmannConfig(max_iters=500, seed=9, drift=ref_drift)
        state = make_state(k3, cfg, ref_surface)
        for _ in range(500):
            step(state)
        assert sum(state.cyc) == 500


class TestRun:
    def test_bit_identical_reruns(self, k3, ref_surface, ref_drift):
        cfg = BoltzmannConfig(max_iters=2000, seed=11, drift=ref_drift)
        a = run(k3, cfg, ref_surface)
        b = run(k3, cfg, ref_surface)
        assert np.array_equal(a.energies, b.energies)
        assert a.best_cut == b.best_cut
        assert np.array_equal(a.best_x, b.best_x)
        assert a.converged_at == b.converged_at

    def test_k3_reaches_optimum_across_100_seeds(self, k3, ref_surface, ref_drift):
        hits = 0
        for seed in range(100):
            cfg = BoltzmannConfig(max_iters=1000, seed=seed, drift=ref_drift,
                                  stop_on_convergence=True,
                                  convergence_fraction=1.0)
            hits += run(k3, cfg, ref_surface).best_cut == 2
        assert hits >= 100 * 0.999

    def test_125_node_convergence_order_of_magnitude(self, ref_surface, ref_drift):
        from dataclasses import replace as dreplace

        from stochanneal.experiments import proxy_best_known

        inst = generate_instance(125, 4.0, seed=125)
        cfg = BoltzmannConfig(max_iters=10**5, runs=5, seed=12, drift=ref_drift)
        inst = dreplace(inst, best_known=proxy_best_known(inst, cfg, ref_surface))
        traces, summary = ensemble(
            inst, dreplace(cfg, stop_on_convergence=True), ref_surface
        )
        assert summary.converged_count == 5
        assert 1e3 <= summary.converged_median <= 1e5

    def test_cycles_sum_to_iterations(self, ref_surface, ref_drift):
        inst = generate_instance(30, 3.0, seed=2)
        cfg = BoltzmannConfig(max_iters=5000, seed=4, drift=ref_drift)
        trace = run(inst, cfg, ref_surface)
        assert int(trace.cycles_per_device.sum()) == trace.iterations == 5000

    def test_ideal_never_touches_hrs(self, ref_surface, ref_drift):
        inst = generate_instance(20, 3.0, seed=6)
        cfg = BoltzmannConfig(max_iters=3000, seed=5, scheme="ideal", drift=ref_drift)
        state = make_state(inst, cfg, ref_surface)
        initial = list(state.hrs)
        for _ in range(3000):
            step(state)
        assert state.hrs == initial

    def test_monitored_and_fixed_mutate_hrs(self, ref_surface, ref_drift):
        inst = generate_instance(20, 3.0, seed=6)
        for scheme in ("fixed-input", "monitored"):
            cfg = BoltzmannConfig(max_iters=200, seed=5, scheme=scheme, drift=ref_drift)
            state = make_state(inst, cfg, ref_surface)
            initial = list(state.hrs)
            for _ in range(200):
                step(state)
            assert state.hrs != initial

    def test_best_cut_is_max_visited(self, ref_surface, ref_drift, k3):
        cfg = BoltzmannConfig(max_iters=500, seed=21, drift=ref_drift)
        trace = run(k3, cfg, ref_surface)
        # energies are recorded each iteration on small instances
        assert trace.best_cut >= int(-trace.energies.min())

    def test_converged_at_semantics(self, k3, ref_surface, ref_drift):
        cfg = BoltzmannConfig(max_iters=2000, seed=13, drift=ref_drift)
        trace = run(k3, cfg, ref_surface)
        assert trace.converged_at is not None
        # cut at the recorded index must be at/over the threshold
        threshold = 0.9 * k3.best_known
        if trace.converged_at > 0:
            assert -trace.energies[trace.converged_at - 1] >= threshold

    def test_stop_on_convergence(self, k3, ref_surface, ref_drift):
        cfg = BoltzmannConfig(max_iters=100000, seed=17, drift=ref_drift,
                              stop_on_convergence=True)
        trace = run(k3, cfg, ref_surface)
        assert trace.iterations <= 100000
        assert trace.converged_at is not None
        assert trace.iterations == max(trace.converged_at, 1)

    def test_stop_without_best_known_raises(self, ref_surface, ref_drift):
        inst = generate_instance(10, 3.0, seed=1)
        cfg = BoltzmannConfig(max_iters=10, stop_on_convergence=True, drift=ref_drift)
        with pytest.raises(MissingBestKnown):
            run(inst, cfg, ref_surface)

    def test_energy_stride_large_instances(self, ref_surface, ref_drift):
        inst = generate_instance(600, 3.0, seed=8)
        cfg = BoltzmannConfig(max_iters=3000, seed=3, drift=ref_drift)
        trace = run(inst, cfg, ref_surface)
        assert trace.stride == 600
        assert trace.energies.size == 3000 // 600

    def test_round_robin_selection(self, ref_surface, ref_drift):
        inst = generate_instance(10, 3.0, seed=14)
        cfg = BoltzmannConfig(max_iters=1000, seed=2, drift=ref_drift,
                              selection="round-robin")
        trace = run(inst, cfg, ref_surface)
        assert np.all(trace.cycles_per_device == 100)

    def test_d2d_offsets_spread(self, ref_surface, ref_drift):
        inst = generate_instance(400, 3.0, seed=9)
        cfg = BoltzmannConfig(max_iters=1, seed=1, d2d_cv=0.2, drift=ref_drift)
        trace = run(inst, cfg, ref_surface)
        # std of offsets ~ cv * |mu_target| = 1.0 decade
        assert trace.mu_eff_spread == pytest.approx(1.0, rel=0.2)

    def test_calibration_shrinks_spread(self, ref_surface, ref_drift):
        inst = generate_instance(400, 3.0, seed=9)
        base = dict(max_iters=1, seed=1, d2d_cv=0.2, drift=ref_drift)
        uncal = run(inst, BoltzmannConfig(**base), ref_surface)
        cal = run(inst, BoltzmannConfig(**base, calibrate=True), ref_surface)
        assert cal.mu_eff_spread * 5 <= uncal.mu_eff_spread
        assert cal.calib_failures > 0  # 1-decade offsets overflow the window


class TestEnsemble:
    def test_single_run_summary_matches_trace(self, k3, ref_surface, ref_drift):
        cfg = BoltzmannConfig(max_iters=500, runs=1, seed=3, drift=ref_drift)
        traces, summary = ensemble(k3, cfg, ref_surface)
        assert summary.runs == 1
        assert summary.best_cut_median == traces[0].best_cut
        assert summary.settling_mean == traces[0].settling_energy
        assert summary.converged_median == traces[0].converged_at

    def test_same_seed_identical_summaries(self, k3, ref_surface, ref_drift):
        cfg = BoltzmannConfig(max_iters=500, runs=4, seed=3, drift=ref_drift)
        _, s1 = ensemble(k3, cfg, ref_surface)
        _, s2 = ensemble(k3, cfg, ref_surface)
        assert s1 == s2

    def test_inter_run_spread_nonzero(self, ref_surface, ref_drift):
        inst = generate_instance(40, 4.0, seed=20)
        cfg = BoltzmannConfig(max_iters=300, runs=25, seed=3, drift=ref_drift)
        traces, summary = ensemble(inst, cfg, ref_surface)
        cuts = {t.best_cut for t in traces}
        assert len(cuts) > 1

    def test_runs_validation(self, k3, ref_surface):
        with pytest.raises(ValueError):
            ensemble(k3, BoltzmannConfig(runs=0), ref_surface)

    def test_parallel_jobs_match_sequential(self, ref_surface, ref_drift):
        inst = generate_instance(20, 3.0, seed=30)
        seq = BoltzmannConfig(max_iters=400, runs=4, seed=6, drift=ref_drift, jobs=1)
        par = BoltzmannConfig(max_iters=400, runs=4, seed=6, drift=ref_drift, jobs=2)
        t1, s1 = ensemble(inst, seq, ref_surface)
        t2, s2 = ensemble(inst, par, ref_surface)
        assert s1 == s2
        for a, b in zip(t1, t2):
            assert np.array_equal(a.energies, b.energies)


class TestGainSchedule:
    def test_schedule_changes_dynamics_but_stays_deterministic(
        self, ref_surface, ref_drift
    ):
        inst = generate_instance(20, 3.0, seed=31)
        flat = BoltzmannConfig(max_iters=2000, seed=7, drift=ref_drift)
        ramp = BoltzmannConfig(max_iters=2000, seed=7, drift=ref_drift, gain_final=0.4)
        a = run(inst, ramp, ref_surface)
        b = run(inst, ramp, ref_surface)
        c = run(inst, flat, ref_surface)
        assert np.array_equal(a.energies, b.energies)
        assert not np.array_equal(a.energies, c.energies)


class TestGibbsConsistency:
    def test_logistic_activation_small_instance(self, ref_surface, ref_drift):
        # quick version of the acceptance check: 3-node chain, 2e5 sweeps
        inst = MaxCutInstance(n=3, edges=((0, 1, 1), (1, 2, -1)))
        from stochanneal.maxcut import build_form, energy

        form = build_form(inst)
        exact = np.array(
            [math.exp(-energy(form, [(c >> k) & 1 for k in range(3)])) for c in range(8)]
        )
        exact /= exact.sum()
        cfg = BoltzmannConfig(max_iters=1, seed=8, activation="logistic", drift=ref_drift)
        state = make_state(inst, cfg, ref_surface)
        counts = np.zeros(8)
        for _ in range(200_000):
            step(state)
            counts[state.x[0] | (state.x[1] << 1) | (state.x[2] << 2)] += 1
        emp = counts / counts.sum()
        tv = 0.5 * np.abs(emp - exact).sum()
        assert tv < 0.05


class TestMonotoneActivation:
    def test_switch_probability_nondecreasing_in_field(self, ref_surface):
        # composite map: u -> voltage -> P(x_i <- 1), any fixed device state
        rng = np.random.default_rng(55)
        cfg = BoltzmannConfig()
        nominal = ref_surface.hrs_for_mu(-5.0, 1.8)
        t_pw = ref_surface.center_pulse_width(1.8, nominal)
        checked = 0
        for _ in range(1000):
            dev = NeuronDevice(
                surface=ref_surface,
                hrs=float(rng.uniform(*ref_surface.r_range)),
                mu_offset=float(rng.normal(0, 0.5)),
            )
            u_scale = float(rng.uniform(1.0, 20.0))
            u1, u2 = sorted(rng.uniform(-30, 30, 2))
            p1 = dev.p_switch(map_field_to_voltage(cfg, u1, u_scale), t_pw)
            p2 = dev.p_switch(map_field_to_voltage(cfg, u2, u_scale), t_pw)
            assert p2 >= p1 - 1e-12
            checked += 1
        assert checked == 1000


class TestMovingAverage:
    def test_window_one_is_identity(self):
        a = [3.0, 1.0, 2.0]
        assert moving_average(a, 1).tolist() == a

    def test_constant_series_unchanged(self):
        a = np.full(10, 4.0)
        assert np.allclose(moving_average(a, 5), 4.0)

    def test_centered_average_values(self):
        got = moving_average([0.0, 1.0, 2.0, 3.0], 3)
        assert got == pytest.approx([0.5, 1.0, 2.0, 2.5])


class TestConfigValidation:
    def test_voltage_ordering(self):
        with pytest.raises(ValueError):
            BoltzmannConfig(v_min=2.0, v_center=1.8)

    def test_gain_positive(self):
        with pytest.raises(ValueError):
            BoltzmannConfig(gain=0.0)

    def test_voltage_window_inside_surface(self, ref_surface):
        cfg = BoltzmannConfig(v_min=1.0, v_center=1.8, v_max=2.2)
        with pytest.raises(ValueError):
            make_state(MaxCutInstance(n=2, edges=((0, 1, 1),)), cfg, ref_surface)
