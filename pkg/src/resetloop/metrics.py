"""Error metrics and spectral analysis of simulation traces.

RMS/max are computed over the error after discarding the initial transient.
The cumulative PSD is a Welch estimate (Hann window, 2^14-sample segments,
50% overlap, one-sided) integrated over frequency; its final value is the
signal variance (Parseval), which the tests check to 5%.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.signal

from .simulate import SimTrace

__all__ = ["MetricsReport", "rms_max", "cpsd", "step_metrics"]

WELCH_NPERSEG = 2**14
SETTLING_BAND = 0.02


@dataclass(frozen=True)
class MetricsReport:
    rms: float
    max_abs: float
    overshoot: float | None = None
    settling_time: float | None = None
    cpsd_freq: np.ndarray | None = None
    cpsd_power: np.ndarray | None = None


def rms_max(trace: SimTrace, discard: float | None = None) -> tuple[float, float]:
    """(rms, max absolute) of the error after ``discard`` seconds."""
    if discard is None:
        discard = trace.transient_discard
    n0 = int(round(discard * trace.fs))
    e = trace.e[n0:]
    if e.size == 0:
        raise ValueError(
            f"discarding {discard:g} s leaves no samples "
            f"({trace.e.size} total at fs={trace.fs:g})"
        )
    return float(np.sqrt(np.mean(e**2))), float(np.max(np.abs(e)))


def cpsd(
    trace: SimTrace, signal: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative power spectral density of the error (or a given signal).

    Returns (freq_hz, cumulative_power); the curve is non-decreasing and its
    final value approximates the signal variance.
    """
    x = trace.e if signal is None else signal
    if x.size < WELCH_NPERSEG * 3 // 2:
        raise ValueError(
            f"trace too short for Welch segments of {WELCH_NPERSEG} samples "
            f"with 50% overlap (got {x.size})"
        )
    f, pxx = scipy.signal.welch(
        x,
        fs=trace.fs,
        window="hann",
        nperseg=WELCH_NPERSEG,
        noverlap=WELCH_NPERSEG // 2,
        detrend="constant",
        scaling="density",
    )
    cumulative = scipy.integrate.cumulative_trapezoid(pxx, f, initial=0.0)
    return f, cumulative


def step_metrics(trace: SimTrace) -> tuple[float, float]:
    """(overshoot %, settling time s) of a step-mode trace.

    The final value is the mean of the last 10% of the output; overshoot is
    the peak excess over it, and the settling time is the last instant the
    output leaves the 2% band around it.  Both are invariant under positive
    scaling of the trace.
    """
    y = trace.y
    n = y.size
    if n < 10:
        raise ValueError("trace too short for step metrics")
    final = float(np.mean(y[-max(n // 10, 1):]))
    if abs(final) <= 1e-9 * max(np.max(np.abs(y)), 1e-300):
        raise ValueError("final value is ~0; step metrics undefined")
    overshoot = max((np.max(y) - final) / final * 100.0, 0.0)
    outside = np.abs(y - final) > SETTLING_BAND * abs(final)
    idx = np.flatnonzero(outside)
    settling = float(trace.t[idx[-1]]) if idx.size else 0.0
    return overshoot, settling
