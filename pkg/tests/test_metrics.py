import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import second_order_step
from resetloop.metrics import cpsd, rms_max, step_metrics
from resetloop.simulate import SimTrace


def make_trace(e=None, y=None, fs=10_000.0, discard=0.0):
    n = e.size if e is not None else y.size
    z = np.zeros(n)
    e = z if e is None else e
    y = z if y is None else y
    return SimTrace(np.arange(n) / fs, z, y, e, z, z, (), fs, discard)


class TestRmsMax:
    def test_constant(self):
        trace = make_trace(e=np.full(1000, 2.0))
        assert rms_max(trace, 0.0) == (2.0, 2.0)

    def test_sine_identity(self):
        fs, f, amp = 10_000.0, 10.0, 3.0
        t = np.arange(int(200 * fs / f)) / fs  # 200 periods
        trace = make_trace(e=amp * np.sin(2 * np.pi * f * t), fs=fs)
        rms, mx = rms_max(trace, 0.0)
        assert rms == pytest.approx(amp / np.sqrt(2.0), rel=1e-3)
        assert mx == pytest.approx(amp, rel=1e-3)

    def test_discard_window(self):
        e = np.concatenate([np.full(5000, 50.0), np.full(5000, 1.0)])
        rms, mx = rms_max(make_trace(e=e), discard=0.5)
        assert rms == 1.0 and mx == 1.0

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError):
            rms_max(make_trace(e=np.ones(100)), discard=1.0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_sign_flip_invariance(self, seed):
        e = np.random.default_rng(seed).standard_normal(500)
        assert rms_max(make_trace(e=e), 0.0) == rms_max(make_trace(e=-e), 0.0)


class TestCpsd:
    def test_white_noise_parseval(self):
        rng = np.random.default_rng(5)
        e = rng.standard_normal(600_000)
        f, cum = cpsd(make_trace(e=e))
        assert np.all(np.diff(cum) >= -1e-15)
        assert cum[-1] == pytest.approx(np.var(e), rel=0.05)

    def test_sine_power_step(self):
        fs, f0, amp = 10_000.0, 37.0, 2.0
        t = np.arange(300_000) / fs
        e = amp * np.sin(2 * np.pi * f0 * t)
        f, cum = cpsd(make_trace(e=e, fs=fs))
        df_bin = f[1] - f[0]
        below = cum[np.searchsorted(f, f0 - 2 * df_bin)]
        above = cum[np.searchsorted(f, f0 + 2 * df_bin)]
        assert above - below == pytest.approx(amp**2 / 2.0, rel=0.05)
        assert below < 0.01 * amp**2 / 2.0

    def test_zero_signal(self):
        f, cum = cpsd(make_trace(e=np.zeros(100_000)))
        assert np.all(cum == 0.0)

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            cpsd(make_trace(e=np.ones(1000)))


class TestStepMetrics:
    def test_first_order_no_overshoot(self):
        t = np.arange(20_000) / 10_000.0
        trace = make_trace(y=1.0 - np.exp(-8.0 * t))
        overshoot, _ = step_metrics(trace)
        # monotone response: only the last-10%-mean final-value estimate
        # separates the peak from the final
        assert overshoot < 1e-4

    def test_second_order_overshoot(self):
        zeta = 0.3
        t = np.arange(100_000) / 10_000.0
        trace = make_trace(y=second_order_step(t, zeta, 2 * np.pi * 5.0))
        overshoot, settling = step_metrics(trace)
        expected = 100.0 * math.exp(-math.pi * zeta / math.sqrt(1 - zeta**2))
        assert overshoot == pytest.approx(expected, abs=0.5)
        assert settling > 0.0

    def test_determinism(self):
        t = np.arange(50_000) / 10_000.0
        y = second_order_step(t, 0.5, 30.0)
        assert step_metrics(make_trace(y=y)) == step_metrics(make_trace(y=y.copy()))

    def test_scale_invariance(self):
        t = np.arange(50_000) / 10_000.0
        y = second_order_step(t, 0.4, 40.0)
        assert step_metrics(make_trace(y=y)) == pytest.approx(
            step_metrics(make_trace(y=7.5 * y))
        )

    def test_zero_final_rejected(self):
        y = np.tile([1.0, -1.0], 5000)  # zero-mean oscillation, final ~ 0
        with pytest.raises(ValueError):
            step_metrics(make_trace(y=y))

    def test_settling_time_definition(self):
        # last excursion beyond the 2% band defines settling
        fs = 1000.0
        y = np.ones(5000)
        y[2000] = 1.05
        trace = make_trace(y=y, fs=fs)
        _, settling = step_metrics(trace)
        assert settling == pytest.approx(2.0, abs=2 / fs)
