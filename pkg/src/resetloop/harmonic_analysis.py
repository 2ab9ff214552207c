"""Describing function and higher-order harmonics of reset systems.

For a reset block with flow (A, B, C, D), jump map A_R and reset condition
e(t) = 0 driven by e(t) = sin(w t), the quasi-linear first-harmonic response
(describing function) is

    G(jw) = C (jw I - A)^-1 (I + j Theta_D(w)) B + D

with the real matrices

    Lambda(w)  = w^2 I + A^2
    Delta(w)   = I + e^((pi/w) A)
    Delta_R(w) = I + A_R e^((pi/w) A)
    Gamma_R(w) = Delta_R^-1 A_R Delta Lambda^-1
    Theta_D(w) = -(2 w^2 / pi) Delta (Gamma_R - Lambda^-1).

The n-th harmonic transfer for odd n >= 3 is

    G(jw, n) = (-2 w^2 C / (j pi)) (A - j w n I)^-1
               Delta(w) [Gamma_R(w) - Lambda^-1(w)] B

and exactly zero for even n.  The common factor is evaluated through the
identity

    Gamma_R - Lambda^-1 = Delta_R^-1 (A_R - I) Lambda^-1

(from A_R Delta - Delta_R = A_R - I), which avoids subtractive cancellation
and makes the linear degeneration exact: with A_R = I (no state resets)
Theta_D vanishes identically, the first harmonic reduces to the plain
linear frequency response and all higher harmonics are exactly zero.

These responses are amplitude-independent: reset systems are positively
homogeneous, so the harmonic ratios do not depend on the input amplitude.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError
from .lti import StateSpace
from .numerics import mat_exp, solve_complex
from .reset_system import ResetStateSpace, lift, rseries

__all__ = [
    "DfKernel",
    "HarmonicResponse",
    "df_kernel",
    "df",
    "hosidf",
    "open_loop_harmonic",
    "sweep",
]


@dataclass(frozen=True)
class DfKernel:
    """Frequency-dependent real matrices shared by df and hosidf at one w.

    ``gamma_minus`` is the stably evaluated difference Gamma_R - Lambda^-1
    that both response formulas consume.
    """

    omega: float
    lam: np.ndarray
    lam_inv: np.ndarray
    delta: np.ndarray
    delta_r: np.ndarray
    gamma_r: np.ndarray
    gamma_minus: np.ndarray
    theta_d: np.ndarray


def df_kernel(sys: ResetStateSpace, omega: float) -> DfKernel:
    """Evaluate Lambda, Delta, Delta_R, Gamma_R and Theta_D at one frequency."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    A = sys.base.A
    n = sys.n_states
    eye = np.eye(n)
    AR = sys.reset_matrix()
    E = mat_exp((np.pi / omega) * A)
    lam = omega**2 * eye + A @ A
    try:
        lam_inv = solve_complex(lam, eye)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"Lambda singular at omega={omega:g}") from exc
    delta = eye + E
    delta_r = eye + AR @ E
    try:
        gamma_minus = solve_complex(delta_r, (AR - eye) @ lam_inv)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"Delta_R singular at omega={omega:g}") from exc
    gamma_r = gamma_minus + lam_inv
    theta_d = -(2.0 * omega**2 / np.pi) * delta @ gamma_minus
    return DfKernel(omega, lam, lam_inv, delta, delta_r, gamma_r, gamma_minus, theta_d)


def df(sys: ResetStateSpace, omega: float, kernel: DfKernel | None = None) -> complex:
    """First-harmonic describing function of a reset block at omega (rad/s)."""
    if sys.n_states == 0:
        return complex(sys.base.D)
    k = kernel if kernel is not None else df_kernel(sys, omega)
    b = sys.base
    n = sys.n_states
    M = 1j * omega * np.eye(n) - b.A
    try:
        v = solve_complex(M, (np.eye(n) + 1j * k.theta_d) @ b.B)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"jwI - A singular at omega={omega:g}") from exc
    return complex((b.C @ v)[0, 0] + b.D)


def hosidf(
    sys: ResetStateSpace, omega: float, n: int, kernel: DfKernel | None = None
) -> complex:
    """n-th harmonic response at omega for n >= 2 (exactly zero for even n)."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if n < 2 or n != int(n):
        raise ValueError("harmonic order must be an integer >= 2")
    if n % 2 == 0:
        return 0.0 + 0.0j
    if sys.n_states == 0:
        return 0.0 + 0.0j
    k = kernel if kernel is not None else df_kernel(sys, omega)
    b = sys.base
    ns = sys.n_states
    M = b.A - 1j * omega * n * np.eye(ns)
    try:
        v = solve_complex(M, k.delta @ k.gamma_minus @ b.B)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"A - jnwI singular at omega={omega:g}, n={n}"
        ) from exc
    return complex(2j * omega**2 / np.pi * (b.C @ v)[0, 0])


def open_loop_harmonic(
    ctrl: ResetStateSpace, plant: StateSpace, omega: float, n: int
) -> complex:
    """Harmonic response of the full open loop (controller then plant).

    The plant states join the composed reset system as non-resetting states,
    and the describing function (n = 1) or n-th harmonic (n >= 2) is
    evaluated on the composition.
    """
    if n < 1 or n != int(n):
        raise ValueError("harmonic order must be an integer >= 1")
    loop = rseries(ctrl, lift(plant))
    if n == 1:
        return df(loop, omega)
    return hosidf(loop, omega, n)


@dataclass(frozen=True)
class HarmonicResponse:
    """Harmonic responses on a log frequency grid.

    ``values[n]`` holds one complex sample per grid frequency; entries are
    NaN where the evaluation hit a singular frequency (recorded in
    ``skipped`` as (omega, n) pairs).  Even orders are identically zero.
    """

    omega: np.ndarray
    values: dict[int, np.ndarray]
    skipped: tuple[tuple[float, int], ...] = ()

    def magnitude_db(self, n: int) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.values[n]))

    def phase_deg(self, n: int) -> np.ndarray:
        return np.degrees(np.angle(self.values[n]))


def sweep(
    sys: ResetStateSpace,
    omega_min: float,
    omega_max: float,
    points: int,
    harmonics: list[int] | tuple[int, ...] = (1,),
) -> HarmonicResponse:
    """Evaluate the requested harmonics over a log-spaced frequency grid.

    Singular frequencies are skipped (NaN) and reported, not fatal.
    """
    if not (0 < omega_min < omega_max):
        raise ValueError("need 0 < omega_min < omega_max")
    if points < 2:
        raise ValueError("need at least 2 grid points")
    orders = sorted(set(int(n) for n in harmonics))
    if orders and orders[0] < 1:
        raise ValueError("harmonic orders must be >= 1")
    grid = np.logspace(np.log10(omega_min), np.log10(omega_max), points)
    values = {n: np.full(points, np.nan + 0j) for n in orders}
    skipped: list[tuple[float, int]] = []
    for i, w in enumerate(grid):
        try:
            kern = df_kernel(sys, w)
        except SingularMatrixError:
            skipped.extend((w, n) for n in orders)
            continue
        for n in orders:
            try:
                if n == 1:
                    values[n][i] = df(sys, w, kern)
                else:
                    values[n][i] = hosidf(sys, w, n, kern)
            except SingularMatrixError:
                skipped.append((w, n))
    if skipped:
        warnings.warn(
            f"sweep skipped {len(skipped)} singular (omega, n) points",
            stacklevel=2,
        )
    return HarmonicResponse(grid, values, tuple(skipped))
