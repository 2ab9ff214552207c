"""Plant models: the built-in desk-scale stage and measured-FRF ingestion.

The default stage is a unit-mass flexure-suspended mover: a lightly damped
mass-spring-damper (suspension mode at 8 Hz, damping ratio 0.02) behind a
double parasitic pole that stands in for the amplifier/actuator roll-off and
sampling chain of a real stage.  The parasitic corner is placed so that the
stock PID design tuned for a 942.5 rad/s crossover sees the ~26 degrees of
excess lag a physical stage exhibits there, i.e. a 30 degree phase margin.

Measured frequency-response data can be loaded from CSV and approximated by
a second-order fit for simulation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FitError, FrfParseError
from .lti import RationalTF, StateSpace, tf_to_ss

__all__ = [
    "PlantModel",
    "FrfRecord",
    "default_stage",
    "load_frf",
    "save_frf",
    "fit_second_order",
    "frf_of",
]

# Poles of the parasitic roll-off pair in the default stage (rad/s), chosen
# so the stock PID design has a 30.0 degree margin at the 2*pi*150 rad/s
# crossover (a pure mass line would leave ~56 degrees).
DEFAULT_PARASITIC_W = 4069.204206397579


@dataclass(frozen=True)
class PlantModel:
    """Second-order mechanical plant gain / (m s^2 + c s + k), optionally
    behind a double parasitic pole at ``parasitic_w`` rad/s."""

    form: str  # "pure_mass" | "mass_spring_damper" | "fitted"
    m: float
    c: float = 0.0
    k: float = 0.0
    gain: float = 1.0
    parasitic_w: float | None = None

    def __post_init__(self):
        if self.form not in ("pure_mass", "mass_spring_damper", "fitted"):
            raise ValueError(f"unknown plant form {self.form!r}")
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if self.c < 0 or self.k < 0:
            raise ValueError("damping and stiffness must be non-negative")
        if self.parasitic_w is not None and self.parasitic_w <= 0:
            raise ValueError("parasitic corner must be positive")

    def tf(self) -> RationalTF:
        num = (self.gain,)
        den = np.array([self.m, self.c, self.k])
        if self.parasitic_w is not None:
            wp = self.parasitic_w
            den = np.polymul(den, np.array([1.0 / wp**2, 2.0 / wp, 1.0]))
        return RationalTF(num, tuple(den))

    def to_state_space(self) -> StateSpace:
        return tf_to_ss(self.tf(), "plant")

    def response(self, omega) -> np.ndarray:
        """Frequency response at omega (rad/s, scalar or array)."""
        s = 1j * np.atleast_1d(np.asarray(omega, dtype=float))
        g = self.gain / (self.m * s**2 + self.c * s + self.k)
        if self.parasitic_w is not None:
            g = g / (s / self.parasitic_w + 1.0) ** 2
        return g if np.ndim(omega) else complex(g[0])


def default_stage() -> PlantModel:
    """The canonical desk-scale plant used throughout the experiments."""
    m = 1.0
    wn = 2.0 * np.pi * 8.0
    zeta = 0.02
    return PlantModel(
        form="mass_spring_damper",
        m=m,
        c=2.0 * zeta * wn * m,
        k=wn**2 * m,
        gain=1.0,
        parasitic_w=DEFAULT_PARASITIC_W,
    )


@dataclass(frozen=True)
class FrfRecord:
    freq_hz: float
    mag_db: float
    phase_deg: float

    def complex_value(self) -> complex:
        return 10.0 ** (self.mag_db / 20.0) * np.exp(1j * np.radians(self.phase_deg))


FRF_HEADER = "freq_hz,mag_db,phase_deg"


def load_frf(path) -> list[FrfRecord]:
    """Parse an FRF CSV (header ``freq_hz,mag_db,phase_deg``).

    Raises FrfParseError with the offending line number on malformed rows,
    and ValueError if frequencies are not strictly increasing.  An empty
    file yields an empty list with a warning.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_frf(fh)


def _parse_frf(fh) -> list[FrfRecord]:
    records: list[FrfRecord] = []
    header_seen = False
    for lineno, raw in enumerate(fh, start=1):
        line = raw.strip()
        if not line:
            continue
        if not header_seen:
            if [c.strip() for c in line.split(",")] != FRF_HEADER.split(","):
                raise FrfParseError(
                    f"expected header {FRF_HEADER!r}, got {line!r}", lineno
                )
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise FrfParseError(f"expected 3 fields, got {len(parts)}", lineno)
        try:
            freq, mag, phase = (float(p) for p in parts)
        except ValueError as exc:
            raise FrfParseError(str(exc), lineno) from exc
        if not all(map(math.isfinite, (freq, mag, phase))):
            raise FrfParseError("non-finite value", lineno)
        records.append(FrfRecord(freq, mag, phase))
    if not records:
        warnings.warn("FRF file contains no data rows", stacklevel=2)
        return records
    freqs = [r.freq_hz for r in records]
    if any(b <= a for a, b in zip(freqs, freqs[1:])):
        raise ValueError("FRF frequencies must be strictly increasing")
    return records


def save_frf(path, records: list[FrfRecord]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(FRF_HEADER + "\n")
        for r in records:
            fh.write(f"{r.freq_hz:.17g},{r.mag_db:.17g},{r.phase_deg:.17g}\n")


def frf_of(model: PlantModel, freqs_hz) -> list[FrfRecord]:
    """Sample a plant model into FRF records (round-trips through save/load)."""
    out = []
    for f in np.asarray(freqs_hz, dtype=float):
        g = model.response(2.0 * np.pi * f)
        out.append(FrfRecord(f, 20.0 * np.log10(abs(g)), np.degrees(np.angle(g))))
    return out


def fit_second_order(
    frf: list[FrfRecord], residual_warn: float = 0.05
) -> tuple[PlantModel, float]:
    """Least-squares fit of 1 / (m s^2 + c s + k) to complex FRF samples.

    The overall scale of (gain, m, c, k) is not identifiable from the data,
    so the fit pins gain = 1 and absorbs the level into (m, c, k); the
    resulting transfer function is what matters for simulation.  Returns the
    fitted model plus the relative RMS residual over the complex samples; a
    warning is emitted when the residual exceeds ``residual_warn`` (data not
    second-order).
    """
    if len(frf) < 10:
        raise FitError(f"need at least 10 FRF records, got {len(frf)}")
    f_hz = np.array([r.freq_hz for r in frf])
    if f_hz[-1] < 10.0 * f_hz[0]:
        raise FitError("FRF must span at least one decade")
    s = 2j * np.pi * f_hz
    g = np.array([r.complex_value() for r in frf])
    # Levy linearization: G*(m s^2 + c s + k) = 1, solved in real/imag parts,
    # with two Sanathanan-Koerner reweighting passes to undo the |den| bias.
    weights = np.ones_like(f_hz)
    theta = None
    for _ in range(3):
        rows = np.stack([g * s**2, g * s, g], axis=1)
        a = np.concatenate([rows.real, rows.imag]) * np.concatenate([weights, weights])[:, None]
        b = np.concatenate([np.ones_like(f_hz), np.zeros_like(f_hz)]) * np.concatenate(
            [weights, weights]
        )
        theta, *_ = np.linalg.lstsq(a, b, rcond=None)
        den = theta[0] * s**2 + theta[1] * s + theta[2]
        mag = np.abs(den)
        if np.any(mag < 1e-300) or not np.all(np.isfinite(theta)):
            raise FitError("rank-deficient or degenerate fit")
        weights = 1.0 / mag
    m, c, k = (float(t) for t in theta)
    if m <= 0:
        raise FitError(f"fit produced non-physical mass {m:g}")
    c = max(c, 0.0)
    k = max(k, 0.0)
    model = PlantModel(form="fitted", m=m, c=c, k=k, gain=1.0)
    g_fit = model.response(2.0 * np.pi * f_hz)
    residual = float(np.sqrt(np.mean(np.abs(g_fit - g) ** 2) / np.mean(np.abs(g) ** 2)))
    if residual > residual_warn:
        warnings.warn(
            f"second-order fit residual {residual:.3g} exceeds {residual_warn:g}; "
            "data is probably not second-order",
            stacklevel=2,
        )
    return model, residual
