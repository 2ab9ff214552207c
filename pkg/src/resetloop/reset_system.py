"""Generalized reset state-space: linear flow plus a jump map.

A reset block flows like its linear base, ``dx/dt = A x + B e``, except when
the reset condition fires -- here always the zero crossing of the block's
error input ``e`` -- at which point the state jumps through

    x(t+) = A_R x,     A_R = blockdiag(A_rho on resetting states,
                                       I     on non-resetting states).

``A_rho`` defaults to the zero matrix (full reset).  With every reset flag
cleared the block is exactly its linear base, which downstream analysis and
simulation rely on as the linear limit.

Composition helpers (`rseries`, `rparallel`, `embed`) concatenate states and
preserve the block structure of A_R; plant or shaping states they introduce
are always non-resetting.  All composed elements must share the same reset
condition: the zero crossing of the composed block's input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lti
from .errors import UnsupportedConfigurationError
from .lti import StateSpace

__all__ = [
    "ERROR_ZERO_CROSSING",
    "ResetStateSpace",
    "ResetEvent",
    "make_clegg",
    "make_fore",
    "make_reset_filter",
    "embed",
    "apply_reset",
    "rseries",
    "rparallel",
    "lift",
]

# The only reset condition implemented: e(t) = 0 on the block's input, even
# when the resetting states sit mid-chain.
ERROR_ZERO_CROSSING = "error-zero-crossing"


@dataclass(frozen=True)
class ResetStateSpace:
    """A linear base plus per-state reset selection and jump map A_rho."""

    base: StateSpace
    reset_flags: tuple[bool, ...]
    A_rho: np.ndarray | None = None
    condition: str = ERROR_ZERO_CROSSING

    def __post_init__(self):
        flags = tuple(bool(f) for f in np.atleast_1d(self.reset_flags))
        n = self.base.n_states
        if len(flags) != n:
            raise ValueError(f"{len(flags)} reset flags for {n} states")
        nr = sum(flags)
        rho = self.A_rho
        if rho is None:
            rho = np.zeros((nr, nr))
        rho = np.asarray(rho, dtype=float)
        if rho.shape == () and nr == 1:
            rho = rho.reshape(1, 1)
        if rho.shape != (nr, nr):
            raise ValueError(f"A_rho must be {nr}x{nr}, got {rho.shape}")
        if nr and np.max(np.abs(np.linalg.eigvals(rho))) > 1.0 + 1e-12:
            raise ValueError("A_rho must be non-expansive (|eig| <= 1)")
        if self.condition != ERROR_ZERO_CROSSING:
            raise UnsupportedConfigurationError(
                f"unsupported reset condition {self.condition!r}"
            )
        rho.flags.writeable = False
        object.__setattr__(self, "reset_flags", flags)
        object.__setattr__(self, "A_rho", rho)

    @property
    def n_states(self) -> int:
        return self.base.n_states

    @property
    def is_linear(self) -> bool:
        return not any(self.reset_flags)

    def reset_matrix(self) -> np.ndarray:
        """Full jump map A_R: A_rho over resetting states, identity elsewhere."""
        n = self.n_states
        AR = np.eye(n)
        idx = np.flatnonzero(self.reset_flags)
        if idx.size:
            AR[np.ix_(idx, idx)] = self.A_rho
        return AR

    def with_flags_cleared(self) -> "ResetStateSpace":
        """The same block with every reset flag cleared (pure linear limit)."""
        return ResetStateSpace(self.base, (False,) * self.n_states)

    def scaled(self, k: float) -> "ResetStateSpace":
        """Scale the block's output by k (C and D); reset behaviour and
        state trajectories are unchanged."""
        b = self.base
        base = StateSpace(b.A, b.B, k * b.C, k * b.D, b.state_labels, dt=b.dt)
        return ResetStateSpace(base, self.reset_flags, self.A_rho, self.condition)


@dataclass(frozen=True)
class ResetEvent:
    """One jump: state vectors just before and just after A_R was applied."""

    time: float
    pre_state: np.ndarray
    post_state: np.ndarray


def apply_reset(sys: ResetStateSpace, x) -> np.ndarray:
    """Apply the jump map: returns A_R x; non-resetting entries unchanged."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != sys.n_states:
        raise ValueError(f"state has {x.shape[0]} entries, expected {sys.n_states}")
    return sys.reset_matrix() @ x


def make_clegg(omega_i: float) -> ResetStateSpace:
    """Resetting integrator with transfer omega_i / s before reset.

    The gain sits on the output (B = 1, C = omega_i) so the resetting state
    is the plain integral of the input regardless of omega_i.
    """
    if omega_i <= 0:
        raise ValueError("omega_i must be positive")
    base = StateSpace([[0.0]], [[1.0]], [[omega_i]], 0.0, ("clegg_int",))
    return ResetStateSpace(base, (True,))


def make_fore(omega_ra: float) -> ResetStateSpace:
    """First-order reset element: unit-DC-gain lag 1 / (s/omega_ra + 1)
    whose single state resets."""
    if omega_ra <= 0:
        raise ValueError("omega_ra must be positive")
    base = StateSpace([[-omega_ra]], [[omega_ra]], [[1.0]], 0.0, ("fore_lag",))
    return ResetStateSpace(base, (True,))


def make_reset_filter(kind: str, omega_c: float, resetting: bool) -> ResetStateSpace:
    """First-order filter with an optionally resetting state.

    kind:
      "lpf"  omega_c / (s + omega_c)
      "hpf"  s / (s + omega_c)        (state carries the complementary LP part)
      "pi"   1 + omega_c / s          (state is the integrator; the unity
                                       path is feedthrough)
    """
    if omega_c <= 0:
        raise ValueError("omega_c must be positive")
    k = kind.lower()
    if k == "lpf":
        base = StateSpace([[-omega_c]], [[omega_c]], [[1.0]], 0.0, ("lpf",))
    elif k == "hpf":
        base = StateSpace([[-omega_c]], [[omega_c]], [[-1.0]], 1.0, ("hpf",))
    elif k == "pi":
        base = StateSpace([[0.0]], [[1.0]], [[omega_c]], 1.0, ("pi_int",))
    else:
        raise ValueError(f"unknown filter kind {kind!r} (expected lpf/hpf/pi)")
    return ResetStateSpace(base, (bool(resetting),))


def lift(sys: StateSpace) -> ResetStateSpace:
    """Wrap a purely linear block as a reset system with no resetting states."""
    return ResetStateSpace(sys, (False,) * sys.n_states)


def _check_conditions(a: ResetStateSpace, b: ResetStateSpace):
    if a.condition != b.condition:
        raise UnsupportedConfigurationError(
            "cannot combine reset elements with different reset conditions "
            f"({a.condition!r} vs {b.condition!r})"
        )


def _combine(a: ResetStateSpace, b: ResetStateSpace, base: StateSpace) -> ResetStateSpace:
    flags = a.reset_flags + b.reset_flags
    na_r, nb_r = sum(a.reset_flags), sum(b.reset_flags)
    rho = np.zeros((na_r + nb_r, na_r + nb_r))
    rho[:na_r, :na_r] = a.A_rho
    rho[na_r:, na_r:] = b.A_rho
    return ResetStateSpace(base, flags, rho, a.condition)


def rseries(a: ResetStateSpace, b: ResetStateSpace) -> ResetStateSpace:
    """Series composition of reset blocks (output of ``a`` into ``b``).

    All resets keep firing on the zero crossing of the composed input.
    """
    _check_conditions(a, b)
    return _combine(a, b, lti.series(a.base, b.base))


def rparallel(a: ResetStateSpace, b: ResetStateSpace) -> ResetStateSpace:
    """Parallel composition of reset blocks (shared input, summed outputs)."""
    _check_conditions(a, b)
    return _combine(a, b, lti.parallel(a.base, b.base))


def embed(
    reset_elem: ResetStateSpace,
    pre: StateSpace | None = None,
    post: StateSpace | None = None,
) -> ResetStateSpace:
    """Put a reset element in a linear chain: pre -> reset_elem -> post.

    The pre/post states are non-resetting and the reset condition remains
    the zero crossing of the chain input.
    """
    out = reset_elem
    if pre is not None:
        out = rseries(lift(pre), out)
    if post is not None:
        out = rseries(out, lift(post))
    return out
