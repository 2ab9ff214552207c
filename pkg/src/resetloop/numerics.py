"""Dense matrix primitives used by the frequency-domain formulas.

Everything here operates on small matrices (a dozen states at most), so the
implementations lean on LAPACK via numpy/scipy: `mat_exp` is scaling-and-
squaring with a Pade approximant (order 13, theta ~ 5.37), `solve_complex`
is LU with partial pivoting.  Both are pure functions on immutable inputs.
"""

import numpy as np
import scipy.linalg

from .errors import SingularMatrixError

__all__ = ["as_matrix", "mat_exp", "solve_complex"]


def as_matrix(entries, *, square: bool = False, dtype=None) -> np.ndarray:
    """Validate and return a 2-D array: rectangular, finite entries.

    Raises ValueError on NaN/Inf entries, ragged input or (with
    ``square=True``) a non-square shape.
    """
    m = np.asarray(entries, dtype=dtype)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(1, -1)
    elif m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if m.dtype.kind not in "fc":
        m = m.astype(float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite (no NaN/Inf)")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def mat_exp(m) -> np.ndarray:
    """Matrix exponential e^M of a real square matrix."""
    m = as_matrix(m, square=True)
    if m.dtype.kind == "c":
        raise ValueError("mat_exp expects a real matrix")
    if m.size == 0:
        return np.zeros((0, 0))
    return scipy.linalg.expm(m)


def solve_complex(m, b) -> np.ndarray:
    """Solve M X = B for X, with M square (real or complex).

    Raises SingularMatrixError when the LU factorization meets a pivot that
    is negligible relative to the matrix scale.
    """
    m = as_matrix(m, square=True)
    b_arr = np.asarray(b)
    b2 = as_matrix(b_arr)
    if b2.shape[0] != m.shape[0]:
        # a 1-D right-hand side arrives as a row; try the column reading
        if b_arr.ndim == 1 and b_arr.shape[0] == m.shape[0]:
            b2 = b_arr.reshape(-1, 1)
        else:
            raise ValueError(
                f"right-hand side has {b2.shape[0]} rows, expected {m.shape[0]}"
            )
    if m.size == 0:
        return np.zeros_like(b2)
    try:
        x = np.linalg.solve(m, b2)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"singular matrix in solve: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("solve produced non-finite values")
    # LAPACK only raises on exact singularity; guard against garbage from
    # a numerically singular factorization.
    scale = np.linalg.norm(m, ord=np.inf) * max(np.linalg.norm(x, ord=np.inf), 1.0)
    residual = np.linalg.norm(m @ x - b2, ord=np.inf)
    if scale > 0 and residual > 1e-8 * scale:
        raise SingularMatrixError(
            f"solve residual {residual:.3e} too large (matrix numerically singular)"
        )
    return x.reshape(np.shape(b))
