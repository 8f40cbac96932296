"""Dense linear-algebra primitives shared by clients, server, and oracles.

Everything here works on plain float64 ndarrays. Matrices with a ridge
term are solved through a symmetric factorization; an explicit inverse is
never formed, because the regularizer may be tiny and the inverse would
throw away half the attainable accuracy.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .errors import DataError, SingularMatrixError

__all__ = [
    "as_matrix",
    "gram",
    "regularized_gram",
    "solve_spd",
    "ridge_fit",
    "random_semi_orthogonal",
    "global_system",
]

# Residual acceptance bound for the pivoted fallback path of solve_spd.
_RESIDUAL_TOL = 1e-9


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D float64 array, rejecting NaN/Inf entries."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


def gram(features: np.ndarray) -> np.ndarray:
    """Exactly symmetric cross-product of the feature rows.

    Accumulated as F.T @ F and then symmetrized as (A + A.T)/2 so the
    result is bitwise symmetric regardless of BLAS kernel choices.
    """
    f = as_matrix(features, "features")
    g = f.T @ f
    return (g + g.T) / 2.0


def regularized_gram(features: np.ndarray, beta: float) -> np.ndarray:
    """Feature cross-product with a ridge term on the diagonal.

    Returns the m-by-m matrix F.T F + beta I; positive definite for any
    beta > 0.
    """
    if beta < 0:
        raise DataError(f"regularizer must be nonnegative, got {beta}")
    g = gram(features)
    g[np.diag_indices_from(g)] += beta
    return g


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for symmetric positive definite A.

    Uses a Cholesky factorization. If A is not numerically positive
    definite (possible without a regularizer on rank-deficient data) the
    solve falls back to a diagonally pivoted symmetric factorization; if
    that also fails, or leaves a residual above 1e-9 * (1 + max|B|), a
    SingularMatrixError names the offending pivot instead of silently
    regularizing.
    """
    a = as_matrix(a, "lhs")
    b = as_matrix(b, "rhs")
    if a.shape[0] != a.shape[1]:
        raise DataError(f"lhs must be square, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise DataError(f"rhs rows {b.shape[0]} do not match lhs dim {a.shape[0]}")

    c, info = lapack.dpotrf(a, lower=1)
    if info == 0:
        x, info = lapack.dpotrs(c, b, lower=1)
        if info == 0:
            return x
        raise SingularMatrixError(f"triangular back-substitution failed (info={info})")

    if info < 0:
        raise SingularMatrixError(f"illegal value in factorization argument {-info}")
    pivot = int(info)

    # Numerically rank-deficient input: refuse rather than hand back one of
    # infinitely many solutions (the residual check below cannot catch a
    # singular system whose right-hand side happens to be consistent).
    evals = np.linalg.eigvalsh(a)
    if evals[-1] <= 0 or evals[0] <= a.shape[0] * np.finfo(np.float64).eps * evals[-1]:
        raise SingularMatrixError(
            f"matrix is not positive definite: leading minor of order {pivot} "
            "failed and the spectrum is numerically singular",
            pivot=pivot,
        )

    # Pivoted symmetric-indefinite fallback (LAPACK dsysv). A success here
    # still gets its residual checked: a borderline system can "solve" to
    # garbage without tripping an exact zero pivot.
    _, _, x, sy_info = lapack.dsysv(a, b, lower=1)
    if sy_info != 0:
        raise SingularMatrixError(
            f"matrix is not positive definite: leading minor of order {pivot} "
            "failed, and the pivoted fallback found a singular factor",
            pivot=pivot,
        )
    residual = np.max(np.abs(a @ x - b))
    if residual > _RESIDUAL_TOL * (1.0 + np.max(np.abs(b), initial=0.0)):
        raise SingularMatrixError(
            f"matrix is numerically singular: leading minor of order {pivot} "
            f"failed and the fallback residual {residual:.3e} exceeds tolerance",
            pivot=pivot,
        )
    return x


def ridge_fit(features: np.ndarray, targets: np.ndarray, beta: float) -> np.ndarray:
    """Closed-form ridge solution (F.T F + beta I)^{-1} F.T Y.

    beta = 0 is accepted but the normal equations must then be full rank.
    """
    f = as_matrix(features, "features")
    y = as_matrix(targets, "targets")
    if f.shape[0] != y.shape[0]:
        raise DataError(
            f"features have {f.shape[0]} rows but targets have {y.shape[0]}"
        )
    return solve_spd(regularized_gram(f, beta), f.T @ y)


def random_semi_orthogonal(n: int, seed: int) -> np.ndarray:
    """Seeded random n-by-n orthogonal matrix with U.T U = I.

    QR factorization of a standard-Gaussian draw, sign-fixed so the
    factorization (and hence the output) is unique for a given seed.
    """
    if n < 1:
        raise DataError(f"orthogonal dimension must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def global_system(
    gram_total: np.ndarray, fused: np.ndarray, count: int, beta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Linear system whose solution is the all-data ridge model.

    ``gram_total`` carries ``count`` ridge terms, one per absorbed client;
    all but one are removed from the diagonal so the solve matches a
    single ridge fit over the stacked data. The personalization path adds
    its local terms on top of this exact system, which keeps the
    zero-personalization case bitwise identical to the global model.
    """
    lhs = gram_total.copy()
    lhs[np.diag_indices_from(lhs)] -= (count - 1) * beta
    rhs = gram_total @ fused
    return lhs, rhs
