"""Dense matrix arithmetic and closed-form least-squares solvers.

Matrices are 2-D ``float64`` numpy arrays in row-major order. Everything
here is deterministic: identical inputs produce bitwise-identical outputs.
Inverses are never formed explicitly; both least-squares routes go through
a symmetric positive-definite factorization with a small additive jitter
so that near-rank-deficient systems (duplicate rows in a mini-batch, for
instance) stay solvable.
"""

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ShapeError, SingularSystemError

# Failed factorizations retry with jitter * 10 until the cap; a zero
# starting jitter enters the ladder at the floor (0 * 10 never escalates).
JITTER_CAP_SCALE = 1e-3
JITTER_FLOOR_SCALE = 1e-12

# Default jitter for lstsq, relative to the mean Gram diagonal. Small
# enough that the residual orthogonality defect it introduces (jitter *
# ||solution||) stays below 1e-6 on batch-sized systems, large enough to
# keep duplicate-row Gram matrices factorizable via escalation.
DEFAULT_JITTER_SCALE = 1e-10

SYMMETRY_TOL = 1e-9


def as_matrix(a) -> NDArray[np.float64]:
    """Coerce ``a`` to a 2-D float64 array with at least one row and column."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"matrix must be at least 1x1, got {m.shape}")
    return m


def matmul(a, b) -> NDArray[np.float64]:
    """Matrix product ``a @ b`` with explicit conformance checking.

    Raises
    ------
    ShapeError
        If ``a.cols != b.rows``.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def frobenius_sq(a) -> float:
    """Sum of squared entries (the squared Frobenius norm)."""
    a = as_matrix(a)
    return float(np.sum(a * a))


def solve_spd(g, b, jitter: float = 0.0) -> NDArray[np.float64]:
    """Solve ``(g + jitter*I) @ s = b`` for a symmetric positive-definite ``g``.

    Uses a Cholesky factorization followed by one iterative-refinement pass,
    which keeps the relative residual near machine precision even for
    condition numbers around 1e8. If the factorization fails, the jitter is
    escalated by factors of 10 up to ``1e-3 * mean(diag(g))``; only then is
    the system declared singular.

    Parameters
    ----------
    g : array, shape (n, n)
        Symmetric (within 1e-9, relative to its largest entry) matrix.
    b : array, shape (n, k)
        Right-hand side, one column per system.
    jitter : float
        Initial multiple of the identity added to ``g``. Must be >= 0.

    Returns
    -------
    s : ndarray, shape (n, k)

    Raises
    ------
    ShapeError
        If ``g`` is not square/symmetric or ``b`` has the wrong row count.
    SingularSystemError
        If no jitter up to the cap makes ``g`` factorizable.
    """
    g = as_matrix(g)
    b = as_matrix(b)
    n = g.shape[0]
    if g.shape[1] != n:
        raise ShapeError(f"expected a square matrix, got {g.shape}")
    if b.shape[0] != n:
        raise ShapeError(f"rhs has {b.shape[0]} rows, system has {n}")
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(g)))):
        raise ShapeError("matrix is not symmetric")
    if jitter < 0:
        raise ShapeError(f"jitter must be >= 0, got {jitter}")

    mean_diag = float(np.trace(g)) / n
    cap = JITTER_CAP_SCALE * mean_diag
    floor = JITTER_FLOOR_SCALE * mean_diag
    eye = np.eye(n)

    j = float(jitter)
    while True:
        gj = g + j * eye if j > 0.0 else g
        try:
            factor = cho_factor(gj, lower=True)
            break
        except LinAlgError:
            nxt = floor if j == 0.0 else 10.0 * j
            if nxt <= j or nxt > cap:
                raise SingularSystemError(
                    f"factorization failed with jitter up to {j:g} (cap {cap:g})"
                ) from None
            j = nxt

    s = cho_solve(factor, b)
    # One refinement pass against the *jittered* system. Refining toward the
    # unjittered g would amplify null-space noise on rank-deficient inputs,
    # which is exactly the case the jitter exists to survive.
    s += cho_solve(factor, b - gj @ s)
    return s


def lstsq(xb, f) -> NDArray[np.float64]:
    """Closed-form least-squares solution of ``xb @ z ~= f``.

    Dispatches on the shape of the design matrix:

    * fat (``rows < cols``): the minimum-norm interpolant
      ``z = xb.T @ (xb @ xb.T)^-1 @ f``, which reproduces ``f`` exactly
      when ``xb`` has full row rank;
    * tall or square (``rows >= cols``): the normal-equations solution
      ``z = (xb.T @ xb)^-1 @ xb.T @ f``, whose residual is orthogonal to
      the column space of ``xb``.

    Both routes solve the Gram system through :func:`solve_spd` with a
    jitter of ``1e-10 * mean(diag(gram))``.

    Raises
    ------
    ShapeError
        If ``xb`` and ``f`` disagree on the number of rows.
    SingularSystemError
        If the Gram matrix is irrecoverably singular.
    """
    xb = as_matrix(xb)
    f = as_matrix(f)
    if xb.shape[0] != f.shape[0]:
        raise ShapeError(
            f"design matrix has {xb.shape[0]} rows, targets have {f.shape[0]}"
        )
    rows, cols = xb.shape
    if rows < cols:
        gram = xb @ xb.T
        jitter = DEFAULT_JITTER_SCALE * float(np.trace(gram)) / rows
        return xb.T @ solve_spd(gram, f, jitter=jitter)
    gram = xb.T @ xb
    jitter = DEFAULT_JITTER_SCALE * float(np.trace(gram)) / cols
    return solve_spd(gram, xb.T @ f, jitter=jitter)
