"""Tiny brute-force routines used as independent ground truth in tests.

Deliberately naive: no BLAS, no factorizations shared with the package.
"""

import numpy as np


def matmul_loops(a, b):
    """Triple-loop matrix product."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def gauss_solve(a, b):
    """Gaussian elimination with partial pivoting, written from scratch."""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = a.shape[0]
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if a[pivot, col] == 0.0:
            raise ZeroDivisionError(f"zero pivot in column {col}")
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        for row in range(col + 1, n):
            factor = a[row, col] / a[col, col]
            a[row, col:] -= factor * a[col, col:]
            b[row] -= factor * b[col]
    x = np.zeros_like(b)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1 :] @ x[row + 1 :]) / a[row, row]
    return x


def random_spd(rng, n, spread=1.0):
    """Well-conditioned random SPD matrix."""
    basis = np.linalg.qr(rng.standard_normal((n, n)))[0]
    eigs = 1.0 + spread * rng.random(n)
    return (basis * eigs) @ basis.T


def random_bundle(rng, n, m, d, client_id=0):
    """Random feature bundle with one-hot targets."""
    from fedhip.client import FeatureBundle
    from fedhip.data import one_hot

    labels = rng.integers(0, d, size=n)
    return FeatureBundle(
        client_id=client_id,
        features=rng.standard_normal((n, m)),
        targets=one_hot(labels, d),
    )
