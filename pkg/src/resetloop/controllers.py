"""Factory for the eight benchmark controllers and loop-shaping helpers.

All controllers share the same tamed-PID backbone designed for a 150 Hz
(942.5 rad/s) crossover.  On top of it:

  PID        the backbone alone
  PI2D       an extra integrator branch (1 + w_i2/s) ahead of the PID
  PICID      same, with the extra integrator replaced by a resetting one
  C_IbLPF    band-pass front: two parallel branches, each an integrator
  C_IbHPF    branch (1 + w_i2/s) followed by a complementary first-order
  C_LPF      LPF/HPF pair at w_bp; exactly the named sub-filter resets
  C_HPF      (IbLPF/IbHPF: the integrator of the LPF/HPF branch resets)
  CGLP_PI2D  a constant-gain lead element (resetting lag + linear lead)
             in series before the PI2D structure

The front (reset) block is always driven directly by the loop error, so its
resets fire on the error zero crossings; the linear tail follows in series.

With both complementary branches linear the band-pass front collapses to the
plain (1 + w_i2/s) branch, so every band-pass variant with resets disabled
reproduces PI2D exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ControllerSpecError,
    DesignInfeasibleError,
    MarginUndefinedError,
    SingularMatrixError,
    TuningError,
)
from .harmonic_analysis import df, open_loop_harmonic
from .lti import RationalTF, StateSpace, tf_to_ss
from .plant import PlantModel
from .reset_system import (
    ResetStateSpace,
    lift,
    make_fore,
    make_reset_filter,
    rparallel,
    rseries,
)

__all__ = [
    "CONTROLLER_NAMES",
    "ControllerSpec",
    "build",
    "build_reset_part",
    "design_cglp",
    "tune_gain_for_bandwidth",
    "phase_margin",
]

CONTROLLER_NAMES = (
    "PID",
    "PI2D",
    "PICID",
    "C_IbLPF",
    "C_IbHPF",
    "C_LPF",
    "C_HPF",
    "CGLP_PI2D",
)

# Backbone corner frequencies and gain (rad/s): integrator a decade below
# the 942.5 rad/s crossover, lead from w_c/5 to 5 w_c, low-pass a decade up.
DEFAULT_K_P = 3.49
DEFAULT_W_I = 94.28
DEFAULT_W_D = 188.57
DEFAULT_W_T = 4714.0
DEFAULT_W_F = 9428.0
DEFAULT_W_I2 = 2.0 * math.pi * 30.0
DEFAULT_W_BP = 2.0 * math.pi * 0.01
DEFAULT_W_C = 2.0 * math.pi * 150.0
# Constant-gain lead element: no gain correction on the resetting lag by
# default, taming pole two octaves above the PID low-pass.  alpha = 1 with
# this taming pole reproduces the reference design point (11 deg lead at the
# crossover from a lead corner ~1.25x the crossover) while keeping the
# element's first-harmonic gain within +/-0.3 dB of unity below crossover;
# larger corrections trade lead for flatness above it.
DEFAULT_ALPHA = 1.0
DEFAULT_W_F_CGLP = 2.0 * DEFAULT_W_F


@dataclass(frozen=True)
class ControllerSpec:
    """Named controller configuration with all corner frequencies and gains.

    ``omega_r``/``omega_ralpha`` of the CGLP_PI2D variant default to None,
    meaning they are derived at build time by `design_cglp` so the element
    compensates the phase-margin loss of the extra integrator at
    ``omega_c``; set them explicitly to override.  ``structure`` selects the
    wiring for name="custom" and must be one of the eight structure names.
    """

    name: str = "PID"
    k_p: float = DEFAULT_K_P
    omega_i: float = DEFAULT_W_I
    omega_d: float = DEFAULT_W_D
    omega_t: float = DEFAULT_W_T
    omega_f: float = DEFAULT_W_F
    omega_i2: float = DEFAULT_W_I2
    omega_bp: float = DEFAULT_W_BP
    omega_r: float | None = None
    omega_ralpha: float | None = None
    omega_f_cglp: float = DEFAULT_W_F_CGLP
    alpha: float = DEFAULT_ALPHA
    omega_c: float = DEFAULT_W_C
    structure: str | None = None

    def __post_init__(self):
        known = CONTROLLER_NAMES + ("custom",)
        if self.name not in known:
            raise ControllerSpecError(
                f"unknown controller name {self.name!r}; valid: {', '.join(known)}"
            )
        if self.name == "custom":
            if self.structure not in CONTROLLER_NAMES:
                raise ControllerSpecError(
                    "custom controller requires structure, one of "
                    + ", ".join(CONTROLLER_NAMES)
                )
        elif self.structure not in (None, self.name):
            raise ControllerSpecError(
                f"structure {self.structure!r} conflicts with name {self.name!r}"
            )
        for attr in ("omega_i", "omega_d", "omega_t", "omega_f", "omega_i2",
                     "omega_bp", "omega_f_cglp", "omega_c"):
            if getattr(self, attr) <= 0:
                raise ControllerSpecError(f"{attr} must be positive")
        for attr in ("omega_r", "omega_ralpha"):
            v = getattr(self, attr)
            if v is not None and v <= 0:
                raise ControllerSpecError(f"{attr} must be positive")
        if not (self.omega_d < self.omega_t < self.omega_f):
            raise ControllerSpecError("need omega_d < omega_t < omega_f")
        if self.alpha <= 0:
            raise ControllerSpecError("alpha must be positive")

    @property
    def effective_structure(self) -> str:
        return self.structure if self.name == "custom" else self.name


def _pid_block(spec: ControllerSpec) -> StateSpace:
    """k_p (1 + w_i/s) (s/w_d + 1)/(s/w_t + 1) / (s/w_f + 1), 3 states."""
    num = spec.k_p * np.polymul([1.0, spec.omega_i], [1.0 / spec.omega_d, 1.0])
    den = np.polymul([1.0, 0.0], np.polymul([1.0 / spec.omega_t, 1.0],
                                            [1.0 / spec.omega_f, 1.0]))
    return tf_to_ss(RationalTF(tuple(num), tuple(den)), "pid")


def _lead_block(w_r: float, w_f: float) -> StateSpace:
    return tf_to_ss(RationalTF((1.0 / w_r, 1.0), (1.0 / w_f, 1.0)), "lead")


def _build_cglp(w_r: float, w_ra: float, w_f: float) -> ResetStateSpace:
    """Resetting lag in series with a linear lead; pass-through for inf."""
    if math.isinf(w_r):
        return lift(StateSpace(np.zeros((0, 0)), np.zeros((0, 1)),
                               np.zeros((1, 0)), 1.0))
    return rseries(make_fore(w_ra), lift(_lead_block(w_r, w_f)))


def _bandpass_front(spec: ControllerSpec, resetting: str | None) -> ResetStateSpace:
    """Two parallel branches PI->LPF and PI->HPF with one resetting state.

    Each branch is an integrator branch (1 + w_i2/s) followed by one of the
    complementary first-order filters at w_bp; the filter confines the
    output of the reset action of its branch to one side of w_bp.
    ``resetting`` is one of None, "int_lpf", "int_hpf", "lpf", "hpf" (the
    integrator of the LPF/HPF branch, or the filter itself).
    """
    pi_lpf = make_reset_filter("pi", spec.omega_i2, resetting == "int_lpf")
    lpf = make_reset_filter("lpf", spec.omega_bp, resetting == "lpf")
    pi_hpf = make_reset_filter("pi", spec.omega_i2, resetting == "int_hpf")
    hpf = make_reset_filter("hpf", spec.omega_bp, resetting == "hpf")
    return rparallel(rseries(pi_lpf, lpf), rseries(pi_hpf, hpf))


_BANDPASS_RESET = {
    "C_IbLPF": "int_lpf",
    "C_IbHPF": "int_hpf",
    "C_LPF": "lpf",
    "C_HPF": "hpf",
}


def build_reset_part(spec: ControllerSpec) -> ResetStateSpace:
    """The front block driven directly by the loop error.

    For PID this is a unity pass-through; for PI2D/PICID the (1 + w_i2/s)
    branch (resetting integrator for PICID); for the band-pass variants the
    four-state parallel pair; for CGLP_PI2D the constant-gain lead element.
    """
    structure = spec.effective_structure
    if structure == "PID":
        return lift(StateSpace(np.zeros((0, 0)), np.zeros((0, 1)),
                               np.zeros((1, 0)), 1.0))
    if structure == "PI2D":
        return make_reset_filter("pi", spec.omega_i2, resetting=False)
    if structure == "PICID":
        return make_reset_filter("pi", spec.omega_i2, resetting=True)
    if structure in _BANDPASS_RESET:
        return _bandpass_front(spec, _BANDPASS_RESET[structure])
    if structure == "CGLP_PI2D":
        w_r, w_ra = spec.omega_r, spec.omega_ralpha
        if w_r is None:
            target = math.degrees(math.atan(spec.omega_i2 / spec.omega_c))
            w_r, w_ra = design_cglp(
                target, spec.omega_c, spec.omega_f_cglp, spec.alpha
            )
        elif w_ra is None:
            w_ra = w_r / spec.alpha
        return _build_cglp(w_r, w_ra, spec.omega_f_cglp)
    raise ControllerSpecError(f"unknown structure {structure!r}")


def build(spec: ControllerSpec) -> ResetStateSpace:
    """Assemble the full controller: front block in series with the PID
    backbone (plus the linear second-integrator branch for CGLP_PI2D)."""
    pid = _pid_block(spec)
    front = build_reset_part(spec)
    if spec.effective_structure == "CGLP_PI2D":
        second_int = make_reset_filter("pi", spec.omega_i2, resetting=False)
        return rseries(front, rseries(second_int, lift(pid)))
    return rseries(front, lift(pid))


def design_cglp(
    target_lead: float,
    omega_c: float,
    omega_f_cglp: float = DEFAULT_W_F_CGLP,
    alpha: float = DEFAULT_ALPHA,
) -> tuple[float, float]:
    """Place the lead corner so the element's first-harmonic phase at
    ``omega_c`` equals ``target_lead`` degrees.

    Solves by bisection on omega_r over [omega_c/100, 100 omega_c] with
    omega_ralpha = omega_r / alpha, then checks the constant-gain property:
    |DF| within +/-1 dB of unity over [omega_c/10, omega_c].  target 0 is
    the no-lead limit and returns a pass-through (inf corners).
    """
    if not (0.0 <= target_lead < 60.0):
        raise ValueError("target lead must be in [0, 60) degrees")
    if omega_c <= 0:
        raise ValueError("omega_c must be positive")
    if target_lead == 0.0:
        return (math.inf, math.inf)

    def lead_error(w_r: float) -> float:
        elem = _build_cglp(w_r, w_r / alpha, omega_f_cglp)
        return math.degrees(np.angle(df(elem, omega_c))) - target_lead

    lo, hi = omega_c / 100.0, 100.0 * omega_c
    f_lo, f_hi = lead_error(lo), lead_error(hi)
    if f_lo < 0.0 or f_hi > 0.0:
        raise DesignInfeasibleError(
            f"no lead corner in [{lo:g}, {hi:g}] rad/s gives "
            f"{target_lead:g} deg at {omega_c:g} rad/s"
        )
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if lead_error(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-12:
            break
    w_r = math.sqrt(lo * hi)
    if abs(lead_error(w_r)) > 0.1:
        raise DesignInfeasibleError(
            f"bisection did not converge to {target_lead:g} deg within 0.1 deg"
        )
    elem = _build_cglp(w_r, w_r / alpha, omega_f_cglp)
    band = np.logspace(math.log10(omega_c / 10.0), math.log10(omega_c), 50)
    gains_db = np.array([20.0 * math.log10(abs(df(elem, w))) for w in band])
    if np.any(np.abs(gains_db) > 1.0):
        raise DesignInfeasibleError(
            f"constant-gain check failed: |DF| spans "
            f"[{gains_db.min():+.2f}, {gains_db.max():+.2f}] dB over "
            f"[{band[0]:g}, {band[-1]:g}] rad/s"
        )
    return (w_r, w_r / alpha)


def tune_gain_for_bandwidth(
    ctrl: ResetStateSpace, plant: PlantModel, omega_c: float
) -> float:
    """Output gain k such that the open-loop first-harmonic magnitude is
    exactly 1 at ``omega_c``.

    Describing functions scale linearly with the output map, so k is the
    reciprocal of the untuned magnitude; a non-monotone magnitude around
    omega_c (crossover would be ambiguous) raises TuningError.
    """
    if omega_c <= 0:
        raise ValueError("omega_c must be positive")
    plant_ss = plant.to_state_space()
    probes = omega_c * np.array([0.5, 0.7, 1.0, 1.4, 2.0])
    mags = np.array(
        [abs(open_loop_harmonic(ctrl, plant_ss, w, 1)) for w in probes]
    )
    diffs = np.diff(mags)
    if not (np.all(diffs < 0) or np.all(diffs > 0)):
        raise TuningError(
            f"open-loop magnitude is not monotone around {omega_c:g} rad/s"
        )
    g = mags[2]
    if g == 0.0:
        raise TuningError(f"open-loop response vanishes at {omega_c:g} rad/s")
    return 1.0 / g


def phase_margin(
    ctrl: ResetStateSpace,
    plant: PlantModel,
    omega_lo: float = 1.0,
    omega_hi: float = 1e5,
    grid_points: int = 400,
) -> float:
    """180 deg plus the open-loop first-harmonic phase at gain crossover.

    The crossover is located on a log grid over [omega_lo, omega_hi] and
    refined by bisection; the phase is unwrapped along the grid so loops
    that dip below -180 deg at intermediate frequencies report the true
    margin.  Raises MarginUndefinedError unless exactly one crossover
    exists.
    """
    plant_ss = plant.to_state_space()
    grid = np.logspace(math.log10(omega_lo), math.log10(omega_hi), grid_points)
    resp = np.full(grid_points, np.nan + 0j)
    for i, w in enumerate(grid):
        try:
            resp[i] = open_loop_harmonic(ctrl, plant_ss, w, 1)
        except SingularMatrixError:
            continue
    valid = np.isfinite(resp)
    if valid.sum() < 2:
        raise MarginUndefinedError("open loop could not be evaluated on the grid")
    mags = np.abs(resp[valid])
    omegas = grid[valid]
    crossings = np.flatnonzero(np.diff(np.sign(mags - 1.0)) != 0)
    if crossings.size == 0:
        raise MarginUndefinedError(
            f"no gain crossover in [{omega_lo:g}, {omega_hi:g}] rad/s"
        )
    if crossings.size > 1:
        raise MarginUndefinedError(
            f"{crossings.size} gain crossovers in [{omega_lo:g}, {omega_hi:g}] rad/s"
        )
    i = crossings[0]
    lo, hi = omegas[i], omegas[i + 1]
    sign_lo = np.sign(mags[i] - 1.0)
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        m = abs(open_loop_harmonic(ctrl, plant_ss, mid, 1))
        if np.sign(m - 1.0) == sign_lo:
            lo = mid
        else:
            hi = mid
    w_x = math.sqrt(lo * hi)
    phase_x = np.angle(open_loop_harmonic(ctrl, plant_ss, w_x, 1))
    # reconcile with the unwrapped grid phase at the bracketing point
    unwrapped = np.unwrap(np.angle(resp[valid]))
    two_pi = 2.0 * math.pi
    phase_x += two_pi * round((unwrapped[i] - phase_x) / two_pi)
    pm = 180.0 + math.degrees(phase_x)
    return (pm + 180.0) % 360.0 - 180.0
