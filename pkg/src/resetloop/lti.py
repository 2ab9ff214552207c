"""Continuous-time SISO LTI blocks and their algebra.

A `StateSpace` is the value type everything else builds on: controllers,
plants and reset elements all carry one.  Blocks compose in series and in
parallel, evaluate on the imaginary axis, and convert to an exact
zero-order-hold discrete form for the sampled loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError
from .numerics import as_matrix, mat_exp, solve_complex

__all__ = [
    "StateSpace",
    "RationalTF",
    "tf_to_ss",
    "series",
    "parallel",
    "freq_response",
    "zoh_discretize",
]


@dataclass(frozen=True)
class StateSpace:
    """SISO state-space block dx/dt = A x + B u, y = C x + D u.

    ``dt`` is None for a continuous-time block and the sample period (s) for
    a discrete-time one produced by `zoh_discretize`.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    state_labels: tuple[str, ...] = ()
    dt: float | None = None

    def __post_init__(self):
        A = as_matrix(self.A, square=True, dtype=float)
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(n, 1) if n else np.zeros((0, 1))
        C = np.asarray(self.C, dtype=float).reshape(1, n) if n else np.zeros((1, 0))
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(C))):
            raise ValueError("B/C entries must be finite")
        labels = tuple(self.state_labels) or tuple(f"x{i}" for i in range(n))
        if len(labels) != n:
            raise ValueError(f"{len(labels)} state labels for {n} states")
        for arr in (A, B, C):
            arr.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", float(self.D))
        object.__setattr__(self, "state_labels", labels)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def poles(self) -> np.ndarray:
        if self.n_states == 0:
            return np.zeros(0, dtype=complex)
        return np.linalg.eigvals(self.A)

    def is_stable(self) -> bool:
        """Strict stability: all poles in the open left half plane (or inside
        the unit circle for a discrete block)."""
        p = self.poles()
        if self.dt is None:
            return bool(np.all(p.real < 0))
        return bool(np.all(np.abs(p) < 1.0))


def static_gain(k: float) -> StateSpace:
    """Zero-state block y = k u."""
    return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), float(k))


@dataclass(frozen=True)
class RationalTF:
    """Rational transfer function, coefficients in s by descending degree."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        num = _strip_leading(tuple(float(c) for c in np.atleast_1d(self.num)))
        den = _strip_leading(tuple(float(c) for c in np.atleast_1d(self.den)))
        if den[0] == 0.0:
            raise ValueError("denominator must have a nonzero leading coefficient")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __call__(self, s: complex) -> complex:
        return complex(np.polyval(self.num, s) / np.polyval(self.den, s))

    def is_proper(self) -> bool:
        return len(self.num) <= len(self.den)


def _strip_leading(coeffs: tuple[float, ...]) -> tuple[float, ...]:
    i = 0
    while i < len(coeffs) - 1 and coeffs[i] == 0.0:
        i += 1
    return coeffs[i:]


def tf_to_ss(tf: RationalTF, labels: tuple[str, ...] | str = "") -> StateSpace:
    """Controllable canonical realization of a proper (or bi-proper) tf.

    The state ordering is deterministic so later stages can refer to
    individual states (e.g. to flag one of them as resetting).
    """
    if not tf.is_proper():
        raise ValueError(
            f"cannot realize an improper transfer function "
            f"(deg num {len(tf.num) - 1} > deg den {len(tf.den) - 1})"
        )
    den = np.asarray(tf.den, dtype=float)
    num = np.asarray(tf.num, dtype=float)
    den = den / den[0]
    num = num / np.asarray(tf.den, dtype=float)[0]
    n = len(den) - 1
    if n == 0:
        return static_gain(num[0] if len(num) else 0.0)
    # pad numerator to full length
    num_full = np.zeros(n + 1)
    num_full[n + 1 - len(num):] = num
    d = num_full[0]
    # remainder coefficients after removing the feedthrough
    rem = num_full[1:] - d * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    if n > 1:
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = rem.reshape(1, n)
    if isinstance(labels, str):
        labels = tuple(f"{labels or 'x'}{i}" for i in range(n))
    return StateSpace(A, B, C, d, labels)


def series(a: StateSpace, b: StateSpace) -> StateSpace:
    """Series composition: the output of ``a`` feeds the input of ``b``.

    State vector is [x_a; x_b]; the frequency response is the product of the
    two responses.
    """
    _check_same_domain(a, b)
    na, nb = a.n_states, b.n_states
    A = np.zeros((na + nb, na + nb))
    A[:na, :na] = a.A
    A[na:, na:] = b.A
    A[na:, :na] = b.B @ a.C
    B = np.vstack([a.B, b.B * a.D])
    C = np.hstack([b.D * a.C, b.C])
    D = b.D * a.D
    return StateSpace(A, B, C, D, a.state_labels + b.state_labels, dt=a.dt)


def parallel(a: StateSpace, b: StateSpace) -> StateSpace:
    """Parallel composition: shared input, summed outputs."""
    _check_same_domain(a, b)
    na, nb = a.n_states, b.n_states
    A = np.zeros((na + nb, na + nb))
    A[:na, :na] = a.A
    A[na:, na:] = b.A
    B = np.vstack([a.B, b.B])
    C = np.hstack([a.C, b.C])
    return StateSpace(A, B, C, a.D + b.D, a.state_labels + b.state_labels, dt=a.dt)


def _check_same_domain(a: StateSpace, b: StateSpace):
    if a.dt != b.dt:
        raise ValueError("cannot compose blocks with different sample times")


def freq_response(sys: StateSpace, omega: float) -> complex:
    """C (jw I - A)^-1 B + D at a single frequency (rad/s), continuous time."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if sys.dt is not None:
        raise ValueError("freq_response expects a continuous-time block")
    n = sys.n_states
    if n == 0:
        return complex(sys.D)
    M = 1j * omega * np.eye(n) - sys.A
    try:
        v = solve_complex(M, sys.B)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"jwI - A singular at omega={omega:g} rad/s"
        ) from exc
    return complex((sys.C @ v)[0, 0] + sys.D)


def zoh_discretize(sys: StateSpace, fs: float) -> StateSpace:
    """Exact zero-order-hold discretization at sampling rate ``fs`` (Hz).

    Computed from the exponential of the augmented matrix [[A, B], [0, 0]]
    scaled by the sample period, so A_d = e^(A Ts) and B_d is the exact held
    input map.
    """
    if fs <= 0:
        raise ValueError("fs must be positive")
    if sys.dt is not None:
        raise ValueError("block is already discrete")
    ts = 1.0 / fs
    n = sys.n_states
    if n == 0:
        return StateSpace(sys.A, sys.B, sys.C, sys.D, sys.state_labels, dt=ts)
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = sys.A * ts
    M[:n, n:] = sys.B * ts
    E = mat_exp(M)
    Ad = E[:n, :n]
    Bd = E[:n, n:]
    return StateSpace(Ad, Bd, sys.C, sys.D, sys.state_labels, dt=ts)
