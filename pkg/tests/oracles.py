"""Independent reference computations used to check the library.

None of these call the code under test or a LAPACK eigensolver.
"""
import math

import numpy as np


def ldl_negative_pivots(M):
    """Number of negative pivots in an unpivoted LDL^T of symmetric ``M``.

    By Sylvester's law of inertia this equals the number of negative
    eigenvalues of ``M``.
    """
    A = np.array(M, dtype=np.float64)
    n = A.shape[0]
    neg = 0
    for j in range(n):
        d = A[j, j]
        if d == 0.0:
            d = 1e-300
        if d < 0:
            neg += 1
        if j + 1 < n:
            col = A[j + 1:, j] / d
            A[j + 1:, j + 1:] -= np.outer(col, A[j, j + 1:])
    return neg


def generalized_eigenvalues(A, B, tol=1e-14):
    """All roots of det(A - lam B) = 0 for symmetric A and SPD B, ascending.

    Each root is located by bisection on the inertia count
    ``#{lam_i < mu} = neg(A - mu B)``.
    """
    n = A.shape[0]
    bound = 1.0
    while ldl_negative_pivots(A - bound * B) < n:
        bound *= 2
    lo_all = -bound
    while ldl_negative_pivots(A - lo_all * B) > 0:
        lo_all *= 2
    roots = []
    for i in range(n):
        lo, hi = lo_all, bound
        # find mu with count(mu) == i+1 boundary: smallest mu where count > i
        while hi - lo > tol * max(1.0, abs(hi)):
            mid = 0.5 * (lo + hi)
            if ldl_negative_pivots(A - mid * B) > i:
                hi = mid
            else:
                lo = mid
        roots.append(0.5 * (lo + hi))
    return np.array(roots)


def null_vector(A, B, lam, iters=6):
    """Eigenvector for ``lam`` by inverse iteration with dense solves."""
    n = A.shape[0]
    x = np.ones(n) / math.sqrt(n)
    shift = lam + 1e-10
    M = A - shift * B
    for _ in range(iters):
        x = gauss_solve(M, B @ x)
        x /= math.sqrt(x @ B @ x)
    return x


def gauss_solve(A, b):
    """Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = A.shape[0]
    for j in range(n):
        p = j + int(np.argmax(np.abs(A[j:, j])))
        if p != j:
            A[[j, p]] = A[[p, j]]
            b[[j, p]] = b[[p, j]]
        for i in range(j + 1, n):
            f = A[i, j] / A[j, j]
            A[i, j:] -= f * A[j, j:]
            b[i] -= f * b[j]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - A[i, i + 1:] @ x[i + 1:]) / A[i, i]
    return x


def slda_reference(X, y, gamma):
    """Shrinkage LDA computed with explicit loops and elimination."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    mu = {}
    for c in (0, 1):
        rows = [X[i] for i in range(n) if y[i] == c]
        mu[c] = sum(rows) / len(rows)
    S = np.zeros((d, d))
    for i in range(n):
        r = X[i] - mu[int(y[i])]
        S += np.outer(r, r)
    S /= n
    nu = sum(S[i, i] for i in range(d)) / d
    R = (1 - gamma) * S + gamma * nu * np.eye(d)
    w = gauss_solve(R, mu[1] - mu[0])
    b = -sum(w[i] * (mu[0][i] + mu[1][i]) for i in range(d)) / 2
    return w, b


def random_spd(rng, d, cond=50.0):
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    s = np.exp(rng.uniform(0, math.log(cond), d))
    return (Q * s) @ Q.T


def ar1_series(rng, n, rho, sigma=1.0, size=None):
    """Stationary AR(1) with innovation SD ``sigma``; rows are independent series."""
    shape = (n,) if size is None else (size, n)
    e = rng.standard_normal(shape) * sigma
    x = np.empty(shape)
    x[..., 0] = e[..., 0] / math.sqrt(1 - rho ** 2)
    for t in range(1, n):
        x[..., t] = rho * x[..., t - 1] + e[..., t]
    return x
