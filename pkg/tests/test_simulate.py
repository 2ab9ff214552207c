import io
import math

import numpy as np
import pytest
import scipy.signal

from oracles import exact_sine
from resetloop.controllers import ControllerSpec, build, tune_gain_for_bandwidth
from resetloop.errors import DivergenceError, UnstableLoopError
from resetloop.lti import StateSpace, freq_response, zoh_discretize
from resetloop.plant import default_stage
from resetloop.reset_system import ResetStateSpace, make_clegg
from resetloop.simulate import (
    SimConfig,
    SignalSpec,
    check_loop_stability,
    closed_loop_matrices,
    gen_signal,
    run,
    run_open_loop,
    step_response,
    write_events_csv,
    write_trace_csv,
)

W_C = 2 * math.pi * 150.0


@pytest.fixture(scope="module")
def plant():
    return default_stage()


def tuned(name, plant):
    ctrl = build(ControllerSpec(name=name))
    return ctrl.scaled(tune_gain_for_bandwidth(ctrl, plant, W_C))


@pytest.fixture(scope="module")
def pid(plant):
    return tuned("PID", plant)


class TestGenSignal:
    def test_sine_shape(self):
        sig = gen_signal(SignalSpec(kind="sine", freq=0.5, amplitude=1.0), 10_000, 60)
        assert sig.size == 600_000
        assert np.max(sig) == pytest.approx(1.0, abs=1e-6)
        # period is 20000 samples
        assert sig[25_000] == pytest.approx(sig[5_000], abs=1e-12)

    def test_bandnoise_deterministic(self):
        a = gen_signal(SignalSpec(kind="bandnoise", seed=7), 10_000, 10)
        b = gen_signal(SignalSpec(kind="bandnoise", seed=7), 10_000, 10)
        assert np.array_equal(a, b)
        c = gen_signal(SignalSpec(kind="bandnoise", seed=8), 10_000, 10)
        assert not np.array_equal(a, c)

    def test_bandnoise_rms_normalized(self):
        sig = gen_signal(SignalSpec(kind="bandnoise", amplitude=2.5, seed=1), 10_000, 30)
        assert np.sqrt(np.mean(sig**2)) == pytest.approx(2.5, rel=1e-12)

    def test_bandnoise_spectrum_confined(self):
        fs = 1000.0
        sig = gen_signal(SignalSpec(kind="bandnoise", seed=3), fs, 400)
        f, pxx = scipy.signal.welch(sig, fs=fs, nperseg=2**17)
        band = (f > 1.0) & (f < 20.0)
        level = np.median(pxx[band])
        for f_probe in (0.05, 300.0):
            idx = np.argmin(np.abs(f - f_probe))
            assert 10 * np.log10(level / pxx[idx]) >= 20.0

    def test_band_validation(self):
        with pytest.raises(ValueError):
            gen_signal(SignalSpec(kind="bandnoise", band=(0.5, 6000.0)), 10_000, 1)

    def test_sine_needs_headroom(self):
        with pytest.raises(ValueError):
            gen_signal(SignalSpec(kind="sine", freq=400.0), 1000.0, 1)


class TestClosedLoop:
    def test_zero_input_zero_trace(self, pid, plant):
        cfg = SimConfig(fs=10_000, duration=1.0, mode="disturbance",
                        signal=SignalSpec(kind="sine", freq=10.0, amplitude=0.0),
                        transient_discard=0.5)
        trace = run(pid, plant, cfg)
        assert np.all(trace.y == 0.0) and np.all(trace.u == 0.0)
        assert trace.reset_events == ()

    def test_error_identity(self, plant):
        ctrl = tuned("PICID", plant)
        cfg = SimConfig(fs=10_000, duration=2.0, mode="reference",
                        signal=SignalSpec(kind="sine", freq=10.0),
                        transient_discard=0.5)
        trace = run(ctrl, plant, cfg)
        assert np.array_equal(trace.e, trace.r - trace.y)

    def test_linear_sine_matches_sensitivity(self, pid, plant):
        # steady-state amplitude against the analytic P / (1 + P C) value
        f_hz = 10.0
        cfg = SimConfig(fs=10_000, duration=20.0, mode="disturbance",
                        signal=SignalSpec(kind="sine", freq=f_hz),
                        transient_discard=5.0)
        trace = run(pid, plant, cfg)
        w = 2 * np.pi * f_hz
        p = plant.response(w)
        c = freq_response(pid.base, w)
        predicted = abs(p / (1.0 + p * c))
        sl = trace.steady_slice()
        measured = np.sqrt(2.0 * np.mean(trace.e[sl] ** 2))
        assert measured == pytest.approx(predicted, rel=0.01)

    def test_reset_disabled_is_bitwise_linear(self, plant):
        ctrl = tuned("PICID", plant)
        cfg = SimConfig(fs=10_000, duration=2.0, mode="disturbance",
                        signal=SignalSpec(kind="sine", freq=10.0),
                        transient_discard=0.5)
        a = run(ctrl.with_flags_cleared(), plant, cfg)
        b = run(ResetStateSpace(ctrl.base, (False,) * ctrl.n_states), plant, cfg)
        assert np.array_equal(a.y, b.y) and np.array_equal(a.u, b.u)
        assert a.reset_events == () and b.reset_events == ()

    def test_reset_events_only_at_sign_changes(self, plant):
        ctrl = tuned("PICID", plant)
        cfg = SimConfig(fs=10_000, duration=3.0, mode="disturbance",
                        signal=SignalSpec(kind="sine", freq=10.0),
                        transient_discard=0.5)
        trace = run(ctrl, plant, cfg)
        assert trace.reset_events
        AR = ctrl.reset_matrix()
        for ev in trace.reset_events:
            k = int(round(ev.time * trace.fs))
            assert trace.e[k - 1] * trace.e[k] < 0.0 or trace.e[k] == 0.0
            assert np.allclose(ev.post_state, AR @ ev.pre_state, rtol=0, atol=1e-15)

    def test_state_decays_without_input(self, pid, plant):
        # autonomous decay of the stable linear base loop, coarse windows
        ctrl_d = zoh_discretize(pid.base, 10_000.0)
        plant_d = zoh_discretize(plant.to_state_space(), 10_000.0)
        A, _ = closed_loop_matrices(ctrl_d, plant_d)
        rng = np.random.default_rng(0)
        x = rng.standard_normal(A.shape[0])
        norms = []
        for _ in range(5):
            for _ in range(5_000):  # 0.5 s windows
                x = A @ x
            norms.append(np.linalg.norm(x))
        assert all(a > b > 0.0 for a, b in zip(norms, norms[1:]))

    def test_refuses_unstable_loop(self, pid, plant):
        with pytest.raises(UnstableLoopError):
            run(pid.scaled(-1.0), plant,
                SimConfig(fs=10_000, duration=1.0, mode="step",
                          signal=SignalSpec(kind="step"), transient_discard=0.1))

    def test_bandpass_marginal_mode_allowed(self, plant):
        ctrl = tuned("C_LPF", plant)
        ctrl_d = zoh_discretize(ctrl.base, 10_000.0)
        plant_d = zoh_discretize(plant.to_state_space(), 10_000.0)
        check_loop_stability(ctrl_d, plant_d)  # must not raise

    def test_doubling_fs_convergence(self, pid, plant):
        rms = {}
        for fs in (40_000.0, 80_000.0):
            cfg = SimConfig(fs=fs, duration=10.0, mode="disturbance",
                            signal=SignalSpec(kind="sine", freq=10.0),
                            transient_discard=5.0)
            trace = run(pid, plant, cfg)
            sl = trace.steady_slice()
            rms[fs] = np.sqrt(np.mean(trace.e[sl] ** 2))
        assert abs(rms[80_000.0] / rms[40_000.0] - 1.0) < 1e-3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(duration=3.0, transient_discard=5.0).validate()
        with pytest.raises(ValueError):
            SimConfig(mode="warp").validate()


class TestOpenLoop:
    def test_clegg_piecewise_closed_form(self):
        # between resets the integrator of sin(2 pi t) follows
        # (cos(w t0) - cos(w t)) / w from a zero state at the reset
        fs, f_hz = 10_000.0, 1.0
        w = 2 * np.pi * f_hz
        e = exact_sine(f_hz, 6, fs)
        t = np.arange(e.size) / fs
        y, events = run_open_loop(make_clegg(1.0), e, fs)
        assert events
        reset_times = [ev.time for ev in events]
        for t0 in reset_times[:-1]:
            k0 = int(round(t0 * fs))
            seg = slice(k0, k0 + int(0.4 * fs / f_hz))
            ref = (np.cos(w * t0) - np.cos(w * t[seg])) / w
            assert np.max(np.abs(y[seg] - ref)) < 1e-4

    def test_divergence_reported(self):
        unstable = ResetStateSpace(
            StateSpace([[50.0]], [[1.0]], [[1.0]], 0.0), (False,)
        )
        with pytest.raises(DivergenceError):
            run_open_loop(unstable, np.ones(20_000), 1000.0)


class TestStepResponse:
    def test_zero_amplitude(self, pid, plant):
        trace = step_response(pid, plant, amplitude=0.0, duration=0.5)
        assert np.all(trace.y == 0.0)

    def test_double_integrator_overshoots_more(self, plant):
        from resetloop.metrics import step_metrics

        ov_pid, _ = step_metrics(step_response(tuned("PID", plant), plant))
        ov_pi2d, _ = step_metrics(step_response(tuned("PI2D", plant), plant))
        assert ov_pi2d > ov_pid

    def test_discrete_loop_tracks_continuous_loop(self, pid, plant):
        # continuous closed loop integrated exactly (constant input => the
        # ZOH-discretized closed loop recursion is the continuous solution)
        fs = 200_000.0
        trace = step_response(pid, plant, fs=fs, duration=0.2)
        pss = plant.to_state_space()
        nc, npl = pid.base.n_states, pss.n_states
        A = np.zeros((nc + npl, nc + npl))
        A[:nc, :nc] = pid.base.A
        A[:nc, nc:] = -pid.base.B @ pss.C
        A[nc:, :nc] = pss.B @ pid.base.C
        A[nc:, nc:] = pss.A - pss.B * pid.base.D @ pss.C
        B = np.vstack([pid.base.B, pss.B * pid.base.D])
        cl = zoh_discretize(
            StateSpace(A, B, np.hstack([np.zeros((1, nc)), pss.C]), 0.0), fs
        )
        x = np.zeros(nc + npl)
        y_ref = np.empty(trace.y.size)
        for k in range(trace.y.size):
            y_ref[k] = (cl.C @ x)[0]
            x = cl.A @ x + cl.B[:, 0]
        final = y_ref[-1]
        assert final == pytest.approx(1.0, rel=0.01)
        assert np.max(np.abs(trace.y - y_ref)) <= 0.01 * abs(final)


class TestTraceCsv:
    def test_trace_format(self, pid, plant):
        cfg = SimConfig(fs=10_000.0, duration=0.01, mode="step",
                        signal=SignalSpec(kind="step"), transient_discard=0.0)
        trace = run(pid, plant, cfg)
        buf = io.StringIO()
        write_trace_csv(trace, buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "t_s,r,y,e,u,d"
        assert len(lines) == 1 + trace.t.size

    def test_events_format(self, plant):
        ctrl = tuned("PICID", plant)
        cfg = SimConfig(fs=10_000, duration=1.0, mode="disturbance",
                        signal=SignalSpec(kind="sine", freq=10.0),
                        transient_discard=0.5)
        trace = run(ctrl, plant, cfg)
        buf = io.StringIO()
        resetting = [i for i, f in enumerate(ctrl.reset_flags) if f]
        write_events_csv(trace, resetting, buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "time_s,state_index,pre,post"
        assert len(lines) == 1 + len(trace.reset_events) * len(resetting)
